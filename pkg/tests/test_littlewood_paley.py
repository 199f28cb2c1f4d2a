import numpy as np
import pytest

from waveguide_lab.errors import PreconditionError
from waveguide_lab.littlewood_paley import (CutoffSpec, DyadicBand, project_band, project_leq,
                                            propagate, smooth_step)
from waveguide_lab.spectral import (FREQUENCY, Geometry, SpectralField, forward_transform, inner,
                                    random_band_limited)

G2 = Geometry(1, 1, 4.0, 8.0, (128, 128))


def rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def mode(g, xi):
    F = np.zeros(g.grid_points, complex)
    idx = tuple(int(round(x * P)) % M for x, P, M in zip(xi, g.circumferences, g.grid_points))
    F[idx] = 1.0
    return SpectralField(g, FREQUENCY, F)


class TestCutoff:
    def test_plateaus_and_evenness(self):
        r = np.linspace(-3, 3, 6001)
        eta = smooth_step(r)
        assert np.all(eta[np.abs(r) <= 1] == 1)
        assert np.all(eta[np.abs(r) >= 2] == 0)
        assert np.allclose(eta, eta[::-1])
        mid = (r > 1) & (r < 2)
        assert np.all(np.diff(eta[mid]) <= 0)

    def test_smoothness(self):
        h = 1e-3
        r = np.arange(0.9, 2.1, h)
        d2 = np.diff(smooth_step(r), 2) / h ** 2
        assert np.max(np.abs(d2)) < 50

    def test_band_must_be_dyadic(self):
        with pytest.raises(PreconditionError):
            DyadicBand(3)
        assert DyadicBand(8).cutoff == CutoffSpec()


class TestProjections:
    def test_core_unchanged_and_exterior_killed(self, rng):
        f = random_band_limited(G2, 2.0, rng)
        assert rel(project_leq(f, 2).values, f.values) < 1e-12
        far = mode(G2, (5.0, 6.0))
        assert np.max(np.abs(project_leq(far, 2).to_frequency().values)) == 0

    def test_telescoping(self, rng):
        f = random_band_limited(G2, 7.0, rng)
        total = project_leq(f, 1)
        for N in (2, 4, 8):
            total = total + project_band(f, N)
        assert rel(total.values, project_leq(f, 8).values) < 1e-12

    def test_band_examples(self):
        m = mode(G2, (4.0, 0.0))
        assert rel(project_band(m, 4).to_frequency().values, m.values) < 1e-15
        z = project_band(mode(G2, (0.0, 0.0)), 4)
        assert np.max(np.abs(z.to_frequency().values)) == 0

    def test_disjoint_bands(self, rng):
        f = random_band_limited(G2, 7.0, rng)
        assert abs(inner(project_band(f, 4), project_band(f, 1))) < 1e-12 * f.norm() ** 2


class TestPropagator:
    def test_identity_at_zero(self, rng):
        f = random_band_limited(G2, 3.0, rng)
        assert propagate(f, 0.0) is f

    def test_unitarity_and_group_law(self, rng):
        for _ in range(20):
            f = random_band_limited(G2, 3.0, rng)
            t, s = rng.uniform(-2, 2, 2)
            ut = propagate(f, t)
            assert abs(ut.norm() / f.norm() - 1) < 1e-12
            both = propagate(ut, s).to_frequency().values
            direct = propagate(f, t + s).to_frequency().values
            assert np.linalg.norm(both - direct) <= 1e-10 * np.linalg.norm(direct)

    def test_single_mode_phase(self):
        g = Geometry(0, 1, 4.0, 1.0, (32,))
        k, t = 3, 0.37
        m = mode(g, (k / g.lam,))
        out = propagate(m, t).to_frequency().values
        assert out[k] == pytest.approx(np.exp(-4j * np.pi ** 2 * (k / g.lam) ** 2 * t))
        assert np.ptp(np.abs(propagate(m, t).to_physical().values)) < 1e-14

    @pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
    def test_gaussian_closed_form(self, t):
        g = Geometry(1, 0, 1.0, 1024.0, (16384,))
        f = SpectralField.from_function(g, lambda x: np.exp(-np.pi * x * x))
        u = propagate(f, t).to_physical().values
        x = g.axis_coordinates()[0]
        a = 1 + 4j * np.pi * t
        exact = a ** -0.5 * np.exp(-np.pi * x * x / a)
        assert np.max(np.abs(u - exact)) < 1e-8

    def test_commutes_with_projection(self, rng):
        f = random_band_limited(G2, 7.0, rng)
        a = propagate(project_band(f, 4), 0.3).to_frequency().values
        b = project_band(propagate(f, 0.3), 4).to_frequency().values
        assert np.max(np.abs(a - b)) <= 1e-15 * np.max(np.abs(b))

    def test_plancherel_with_propagation(self, rng):
        f = random_band_limited(G2, 3.0, rng)
        assert forward_transform(propagate(f, 0.5)).norm() == pytest.approx(f.norm(), rel=1e-12)
