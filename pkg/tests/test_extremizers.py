import numpy as np
import pytest
from scipy.integrate import quad

from waveguide_lab.bilinear import TimeWindow
from waveguide_lab.errors import PreconditionError, WraparoundError
from waveguide_lab.extremizers import (ExtremizerCase, box_measure, build_pair,
                                       decay_profile, envelope_marginal, global_failure_demo,
                                       ladder_stability, lower_bound_check, packet_peak,
                                       phi_field, phi_hat)
from waveguide_lab.littlewood_paley import propagate
from waveguide_lab.spectral import Geometry, SpectralField


class TestCases:
    @pytest.mark.parametrize("kw", [dict(N1=12), dict(N1=2, N2=4), dict(case_id="nope"),
                                    dict(case_id="torus-1d", m=2),
                                    dict(case_id="torus-highd", m=1, n=1)])
    def test_validation(self, kw):
        args = dict(case_id="real-separated", lam=4.0, N1=8, N2=4)
        args.update(kw)
        with pytest.raises(PreconditionError):
            ExtremizerCase(**args)

    def test_adjacent_boxes_on_diagonal(self):
        bf, bg = ExtremizerCase("real-separated", 4.0, 4, 4).boxes()
        assert bg[0][1] == bf[0][0]    # touching faces
        assert bf[1] == bg[1] == (-2.0, 2.0)

    @pytest.mark.parametrize("case", [
        ExtremizerCase("real-separated", 4.0, 16, 4),
        ExtremizerCase("torus-1d", 4.0, 8, 1),
        ExtremizerCase("torus-highd", 2.0, 16, 2, m=2, n=1),
    ])
    def test_plancherel_on_indicators(self, case):
        pair = build_pair(case)
        bf, bg = case.boxes()
        geo = pair.f.geometry
        assert abs(pair.norm_f ** 2 - box_measure(geo, bf)) <= 1e-10 * pair.norm_f ** 2
        assert abs(pair.norm_g ** 2 - box_measure(geo, bg)) <= 1e-10 * pair.norm_g ** 2

    def test_torus_1d_modulus_floor(self):
        # |f| ~ 1/lam-scale on |x| <= 1/4 uniformly in y (single torus mode)
        case = ExtremizerCase("torus-1d", 4.0, 8, 1, box_length=8.0)
        f = build_pair(case).f.to_field().to_physical()
        x = f.geometry.axis_coordinates()[0]
        amp = np.abs(f.values[np.abs(x) <= 0.25])
        assert np.ptp(amp, axis=1).max() < 1e-12
        assert amp.min() > 0.5 * amp.max()


class TestLowerBound:
    def test_zero_box_degenerate(self):
        case = ExtremizerCase("torus-1d", 4.0, 8, 1)
        pair = build_pair(case)
        assert pair.norm_f > 0
        # a box thinner than the lattice spacing holds no sites
        from waveguide_lab.extremizers import box_patch
        empty = box_patch(pair.f.geometry, [(0.01, 0.02), (8.01, 8.02)])
        assert empty.norm() == 0.0

    def test_degenerate_flag_and_exclusion(self, monkeypatch):
        import waveguide_lab.extremizers as ex
        case = ExtremizerCase("torus-1d", 4.0, 8, 1)
        real = ex.build_pair(case)
        zero = real.f.scaled(0.0)
        monkeypatch.setattr(ex, "build_pair",
                            lambda c: ex.ExtremizerPair(c, zero, zero, 0.0, 0.0))
        r = ex.lower_bound_check(case)
        assert r.degenerate and r.ratio == 0.0
        monkeypatch.undo()
        good = lower_bound_check(case)
        assert ladder_stability([good, r]) == 1.0

    def test_torus_1d_ladder(self):
        res = [lower_bound_check(ExtremizerCase("torus-1d", lam, 8, 1)) for lam in (2, 4, 8)]
        assert all(r.ratio > 0 for r in res)
        assert ladder_stability(res) >= 1 / 32

    def test_real_separated_ladder(self):
        res = [lower_bound_check(ExtremizerCase("real-separated", 4.0, N1, 4))
               for N1 in (8, 16)]
        assert ladder_stability(res) >= 1 / 32

    def test_explicit_window_and_wrap(self):
        case = ExtremizerCase("torus-1d", 4.0, 8, 1, box_length=4.0)
        with pytest.raises(WraparoundError):
            lower_bound_check(case, TimeWindow(0, 1, 64))


class TestTransport:
    def test_marginal_mass_is_plancherel(self):
        pair = build_pair(ExtremizerCase("real-separated", 4.0, 8, 4))
        x, dens = envelope_marginal(pair.f, 0.01)
        mass = np.sum(dens) * (x[1] - x[0])
        assert mass == pytest.approx(pair.norm_f ** 2, rel=1e-12)

    def test_marginal_matches_dense(self):
        g = Geometry(1, 1, 2.0, 16.0, (128, 32))
        pair = build_pair(ExtremizerCase("real-separated", 2.0, 2, 1, box_length=16.0))
        from waveguide_lab.spectral import SpectralPatch
        p = SpectralPatch(g, pair.f.origin, pair.f.values)
        t = 0.05
        u = propagate(p.to_field(), t).to_physical().values
        dense = np.sum(np.abs(u) ** 2, axis=1) * g.spacing[1]
        x, dens = envelope_marginal(p, t, oversample=1)
        xd = g.axis_coordinates()[0]
        common, i, j = np.intersect1d(xd, x, return_indices=True)
        assert len(common) >= 32
        assert np.allclose(dens[j], dense[i], rtol=1e-9, atol=1e-14)

    @pytest.mark.parametrize("t", [0.0, 0.005, 0.01, 0.02])
    def test_peak_tracks_group_velocity(self, t):
        case = ExtremizerCase("real-separated", 4.0, 16, 4)
        pair = build_pair(case)
        xc = 16 + 4          # centre of the f box along the first axis
        assert abs(packet_peak(pair.f, t) - 4 * np.pi * xc * t) <= 1.0 / case.N2


class TestGlobalFailure:
    def test_log_growth_matches_stationary_phase(self):
        # int |U(t) phi|^4 dx ~ int |phi_hat|^4 / (4 pi t), so the L4 norm^4 grows like b log T
        b = quad(lambda s: phi_hat(s) ** 4, -1, 1)[0] / (4 * np.pi)
        tab = global_failure_demo(4.0, 8, 1, T_list=(10, 100, 1000), box_length=2.0 ** 15,
                                  steps_per_window=128)
        assert np.all(np.diff(tab.bilinear_norm) > 0)
        assert tab.slope == pytest.approx(b, rel=0.03)
        assert tab.relative_residual < 1e-2
        assert np.allclose(tab.bilinear_norm ** 2, 4.0 * tab.l4_fourth)

    def test_wrap_rejected(self):
        with pytest.raises(WraparoundError):
            global_failure_demo(4.0, 8, 1, T_list=(10, 100, 1000), box_length=2.0 ** 12)


class TestDecay:
    def test_dispersive_rate(self):
        prof = decay_profile(phi_field(2.0 ** 15, 2 ** 17), t_list=(10, 100, 1000))
        assert prof.max_drift <= 4
        # sqrt(t) |U(t) phi(0)| -> |phi_hat(0)| / sqrt(4 pi) = 1/2
        assert np.allclose(prof.values, 0.5, rtol=2e-3)

    def test_zero_degenerate(self):
        g = Geometry(1, 0, 1.0, 64.0, (256,))
        prof = decay_profile(SpectralField.zeros(g), t_list=(1, 2))
        assert prof.degenerate and not np.any(prof.values)
