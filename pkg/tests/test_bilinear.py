import math
from fractions import Fraction

import numpy as np
import pytest

from waveguide_lab.bilinear import (PairIntegrand, SeparableIntegrand, TimeWindow,
                                    check_no_wrap, estimate_record, integrand, packet_geometry,
                                    phase_rule_steps, predicted_constant, random_packet,
                                    rank_one_factors, spacetime_l2_product, strichartz_l4,
                                    support_steps)
from waveguide_lab.errors import (BandLimitError, PreconditionError, UnsupportedRegimeError,
                                  WraparoundError)
from waveguide_lab.littlewood_paley import project_band, propagate
from waveguide_lab.spectral import Geometry, SpectralField, SpectralPatch, random_band_limited


def dense_oracle(f, g, N1, N2, w):
    """Propagate on the full grid, multiply, integrate; trapezoid in time."""
    pf, pg = project_band(f, N1), project_band(g, N2)
    vol = f.geometry.cell_volume
    vals = []
    for t in w.nodes():
        u = propagate(pf, t).to_physical().values * propagate(pg, t).to_physical().values
        vals.append(np.sum(np.abs(u) ** 2) * vol)
    return math.sqrt(np.trapezoid(vals, w.nodes()))


def torus_mode(g, k, c):
    return SpectralField.from_function(g, lambda y: c * np.exp(2j * np.pi * k * y / g.lam))


@pytest.fixture
def pair(rng):
    g = Geometry(1, 1, 2.0, 8.0, (64, 32))
    # bands small enough that the dense grid sum of |u v|^2 is alias free
    return g, random_band_limited(g, 1.9, rng), random_band_limited(g, 0.9, rng)


class TestSpacetimeProduct:
    def test_zero_and_band_miss(self, pair):
        g, f, h = pair
        w = TimeWindow(0, 0.1, 32)
        assert spacetime_l2_product(f, SpectralField.zeros(g), 4, 1, w) == 0.0
        assert spacetime_l2_product(f, h, 16, 1, w) == 0.0

    def test_single_mode_identity(self):
        g = Geometry(0, 1, 4.0, 1.0, (64,))
        cf, cg = 0.7 - 0.2j, 1.3j
        f, h = torus_mode(g, 16, cf), torus_mode(g, 4, cg)   # frequencies 4 and 1
        w = TimeWindow(0.2, 1.7, 64)
        got = spacetime_l2_product(f, h, 4, 1, w)
        assert got == pytest.approx(abs(cf) * abs(cg) * math.sqrt(g.lam * w.length), rel=1e-12)
        # hand quadrature of the constant-modulus product
        assert got == pytest.approx(dense_oracle(f, h, 4, 1, w), rel=1e-12)

    def test_matches_dense_oracle(self, pair):
        g, f, h = pair
        w = TimeWindow(0.0, 0.25, 256)
        assert spacetime_l2_product(f, h, 2, 1, w) == pytest.approx(
            dense_oracle(f, h, 2, 1, w), rel=1e-10)

    def test_symmetry_and_scaling(self, pair):
        g, f, h = pair
        w = TimeWindow(0.0, 0.25, 64)
        a = spacetime_l2_product(f, h, 2, 1, w)
        assert spacetime_l2_product(h, f, 1, 2, w) == a
        assert spacetime_l2_product(f.scaled(-2.5j), h, 2, 1, w) == pytest.approx(2.5 * a,
                                                                                 rel=1e-13)

    def test_nyquist_content_names_direction(self):
        g = Geometry(1, 1, 1.0, 4.0, (16, 8))
        F = np.zeros((16, 8), complex)
        F[8, 0] = 1.0   # real-direction Nyquist site, frequency 2
        p = SpectralPatch(g, (0, 1), np.ones((1, 1)))
        with pytest.raises(BandLimitError, match="direction 0"):
            spacetime_l2_product(SpectralField(g, "frequency", F), p, 2, 1,
                                 TimeWindow(0, 1, 16))

    def test_quadrature_convergence(self, rng):
        geo = packet_geometry(1, 1, 4.0, 16.0, 20.0)
        f = random_packet(geo, 8, rng)
        h = random_packet(geo, 2, rng)
        T = 0.25
        n = phase_rule_steps(8, T)
        a = spacetime_l2_product(f, h, 8, 2, TimeWindow(0, T, n))
        b = spacetime_l2_product(f, h, 8, 2, TimeWindow(0, T, 2 * n))
        assert abs(a - b) <= 0.01 * b

    def test_support_steps_resolve(self, rng):
        geo = packet_geometry(1, 1, 4.0, 16.0, 20.0)
        f, h = random_packet(geo, 8, rng), random_packet(geo, 2, rng)
        n = support_steps(f, h, 8, 2, 1.0, samples_per_period=8)
        a = spacetime_l2_product(f, h, 8, 2, TimeWindow(0, 1, n))
        b = spacetime_l2_product(f, h, 8, 2, TimeWindow(0, 1, 4 * n))
        assert abs(a - b) <= 1e-3 * b
        assert n < phase_rule_steps(8, 1.0)


class TestEngines:
    def test_separable_equals_full(self, rng):
        geo = packet_geometry(2, 1, 2.0, 8.0, 10.0)
        a = random_packet(geo, 4, rng, torus_width=0.0)
        b = random_packet(geo, 1, rng, torus_width=0.0)
        fa, fb = rank_one_factors(a.values), rank_one_factors(b.values)
        assert fa is not None and fb is not None
        t = np.linspace(0, 0.3, 17)
        sep = SeparableIntegrand(a, b, fa, fb)(t)
        full = PairIntegrand(a, b)(t)
        assert np.max(np.abs(sep - full)) <= 1e-12 * np.max(full)
        assert isinstance(integrand(a, b), SeparableIntegrand)

    def test_rank_one_detection(self, rng):
        v = rng.normal(size=(3, 4))
        assert rank_one_factors(v) is None
        u = np.multiply.outer(rng.normal(size=3), rng.normal(size=4))
        assert np.allclose(np.multiply.outer(*rank_one_factors(u)), u)

    def test_no_wrap_guard(self, rng):
        geo = packet_geometry(1, 1, 4.0, 16.0, 20.0)
        f = random_packet(geo, 8, rng, axis=0)
        check_no_wrap(f, 0.05)
        with pytest.raises(WraparoundError):
            check_no_wrap(f, 1.0)


class TestStrichartz:
    def test_zero(self):
        g = Geometry(0, 1, 4.0, 1.0, (32,))
        assert strichartz_l4(SpectralField.zeros(g), TimeWindow(0, 1, 16)) == 0.0

    def test_single_mode(self):
        g = Geometry(0, 1, 4.0, 1.0, (32,))
        c = 1.7
        w = TimeWindow(0, 2.0, 16)
        got = strichartz_l4(torus_mode(g, 3, c), w)
        assert got == pytest.approx(c * (g.lam * w.length) ** 0.25, rel=1e-12)

    def test_matches_dense_oracle(self, pair):
        g, f, _ = pair
        w = TimeWindow(0, 0.1, 64)
        vals = [np.sum(np.abs(propagate(f, t).to_physical().values) ** 4) * g.cell_volume
                for t in w.nodes()]
        assert strichartz_l4(f, w) == pytest.approx(np.trapezoid(vals, w.nodes()) ** 0.25,
                                                    rel=1e-12)


class TestPredictedConstant:
    def test_examples(self):
        assert predicted_constant(1, 1, 1, 1, 1) == Fraction(2)
        assert predicted_constant(2, 1, 4, 64, 8) == Fraction(5, 4)
        assert predicted_constant(1, 1, 1e6, 2 ** 20, 1) < 1e-5

    @pytest.mark.parametrize("mn", [(1, 2), (1, 3), (0, 2)])
    def test_unsupported(self, mn):
        with pytest.raises(UnsupportedRegimeError):
            predicted_constant(*mn, 4, 16, 4)

    def test_ordering(self):
        with pytest.raises(PreconditionError):
            predicted_constant(1, 1, 4, 2, 4)


def test_estimate_record_ratio(rng):
    geo = packet_geometry(1, 1, 4.0, 16.0, 20.0)
    f, h = random_packet(geo, 16, rng), random_packet(geo, 4, rng)
    rec = estimate_record(f, h, 16, 4, TimeWindow(0, 0.05, 256))
    assert 0 < rec.ratio < math.inf
    assert rec.k_pred == pytest.approx(0.25 + 0.25)
    assert rec.ratio == pytest.approx(rec.lhs / (math.sqrt(rec.k_pred) * rec.norm_f * rec.norm_g))
