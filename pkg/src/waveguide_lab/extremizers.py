"""Wave-packet families that saturate the bilinear estimate, and the
global-in-time failure on R x T_lam.

Frequency data are indicators of lattice boxes, stored as patches.  Box
sides are fixed at exactly N2 (for "comparable to N2") and exactly 1 (for
"order one").

Families
--------
``real-separated``
    f and g separated along the first real direction: g on
    xi_1 in [N2/2, 3N2/2], f on xi_1 in [N1 + N2/2, N1 + 3N2/2], all other
    coordinates in [-N2/2, N2/2].  With N1 = N2 the boxes are adjacent.
``torus-1d``
    (m, n) = (1, 1); one torus mode each (N1 for f, N2 for g) times a real
    box |xi_1| <= 1/2.
``torus-highd``
    d >= 3; f is a real box of side N2 on the torus slab xi_d = N1, g a real
    box of side 1 on xi_d = N2.
``global-failure``
    m = 1; f = phi(x) e^{2 pi i N1 y}, g = phi(x) e^{2 pi i N2 y} with
    phi = P_{<=1/2}(exp(-x^2)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .bilinear import (TimeWindow, check_no_wrap,
                       packet_geometry, predicted_constant, spacetime_l2_product,
                       spacetime_l2_profile, support_steps)
from .errors import PreconditionError
from .fitting import fit_scaling
from .littlewood_paley import propagate, smooth_step
from .spectral import Geometry, SpectralField, SpectralPatch, as_patch

CASES = ("real-separated", "torus-1d", "torus-highd", "global-failure")

_DEFAULT_L = {"real-separated": 128.0, "torus-1d": 32.0, "torus-highd": 32.0,
              "global-failure": float(2 ** 18)}


def _dyadic(x, name):
    if int(x) != x or x < 1 or (int(x) & (int(x) - 1)):
        raise PreconditionError(f"{name} must be a power of two >= 1, got {x}")


@dataclass(frozen=True)
class ExtremizerCase:
    """One member of an extremizer family.

    ``box_length`` defaults per family; ``window`` defaults to [0, 1/N2^2]
    for real-separated and [0, 1] otherwise.
    """

    case_id: str
    lam: float
    N1: int
    N2: int
    m: int = 1
    n: int = 1
    box_length: float | None = None
    window: tuple | None = None
    samples_per_period: float = 4.0

    def __post_init__(self):
        if self.case_id not in CASES:
            raise PreconditionError(f"unknown case {self.case_id!r}; choose from {CASES}")
        _dyadic(self.N1, "N1")
        _dyadic(self.N2, "N2")
        if self.N1 < self.N2:
            raise PreconditionError("need N1 >= N2")
        if not self.lam > 0:
            raise PreconditionError("lam must be positive")
        m, n, c = self.m, self.n, self.case_id
        if c == "torus-1d" and (m, n) != (1, 1):
            raise PreconditionError("torus-1d requires m = n = 1")
        if c == "torus-highd" and (m + n < 3 or n < 1):
            raise PreconditionError("torus-highd requires d >= 3 and a torus direction")
        if c == "global-failure" and m != 1:
            raise PreconditionError("global-failure requires m = 1")
        if c == "real-separated" and m < 1:
            raise PreconditionError("real-separated requires a real direction")
        if self.box_length is None:
            object.__setattr__(self, "box_length", _DEFAULT_L[c])

    @property
    def d(self):
        return self.m + self.n

    @property
    def time_window(self):
        if self.window is not None:
            return tuple(float(t) for t in self.window)
        if self.case_id == "real-separated":
            return (0.0, 1.0 / self.N2 ** 2)
        return (0.0, 1.0)

    def boxes(self):
        """Per-axis closed intervals [(lo, hi), ...] for f and for g."""
        d, N1, N2 = self.d, self.N1, self.N2
        c = self.case_id
        if c == "real-separated":
            side = [(-N2 / 2, N2 / 2)] * d
            bf = [(N1 + N2 / 2, N1 + 1.5 * N2)] + side[1:]
            bg = [(N2 / 2, 1.5 * N2)] + side[1:]
        elif c == "torus-1d":
            bf = [(-0.5, 0.5), (N1, N1)]
            bg = [(-0.5, 0.5), (N2, N2)]
        elif c == "torus-highd":
            bf = [(-N2 / 2, N2 / 2)] * (d - 1) + [(N1, N1)]
            bg = [(-0.5, 0.5)] * (d - 1) + [(N2, N2)]
        else:
            raise PreconditionError("global-failure data are not boxes")
        return bf, bg

    def geometry(self):
        if self.case_id == "global-failure":
            return packet_geometry(1, self.n, self.lam, self.box_length,
                                   [1.0] + [self.N1 + 1.0] * self.n)
        bf, bg = self.boxes()
        edges = [max(abs(a) for a in (*f, *g)) + 1.0 for f, g in zip(bf, bg)]
        return packet_geometry(self.m, self.n, self.lam, self.box_length, edges)


def box_patch(geometry, intervals):
    """Indicator of the lattice box prod_a [lo_a, hi_a] as a patch.

    An empty box yields a single zero site.
    """
    circ = geometry.circumferences
    lows, widths = [], []
    for (lo, hi), P in zip(intervals, circ):
        k0 = math.ceil(lo * P - 1e-9)
        k1 = math.floor(hi * P + 1e-9)
        lows.append(k0)
        widths.append(k1 - k0 + 1)
    if min(widths) <= 0:
        return SpectralPatch(geometry, (0,) * geometry.d, np.zeros((1,) * geometry.d))
    return SpectralPatch(geometry, tuple(lows), np.ones(tuple(widths)))


def box_measure(geometry, intervals):
    """(d xi)_lam measure of the lattice points in a box."""
    count = 1
    for (lo, hi), P in zip(intervals, geometry.circumferences):
        count *= max(0, math.floor(hi * P + 1e-9) - math.ceil(lo * P - 1e-9) + 1)
    return count * geometry.frequency_weight


def phi_hat(xi):
    """Fourier transform of P_{<=1/2}(exp(-x^2))."""
    xi = np.asarray(xi, dtype=float)
    return math.sqrt(math.pi) * np.exp(-(math.pi * xi) ** 2) * smooth_step(2.0 * xi)


def _phi_patch(geo, mode):
    # phi(x) e^{2 pi i mode y} on R x T^n: f_hat = lam^n phi_hat(xi_1) at one torus site
    P = geo.circumferences[0]
    k = np.arange(-int(P) + 1, int(P))        # |xi| < 1 covers supp phi_hat
    amp = phi_hat(k / P).astype(complex)
    shape = (len(k),) + (1,) * geo.n
    vals = amp.reshape(shape) * geo.lam ** geo.n
    origin = (int(k[0]),) + tuple(int(round(mode * geo.lam)) for _ in range(geo.n))
    return SpectralPatch(geo, origin, vals)


@dataclass(frozen=True)
class ExtremizerPair:
    case: ExtremizerCase
    f: SpectralPatch
    g: SpectralPatch
    norm_f: float
    norm_g: float


def build_pair(case):
    """Frequency-box data for ``case`` with their L^2 norms."""
    geo = case.geometry()
    if case.case_id == "global-failure":
        f, g = _phi_patch(geo, case.N1), _phi_patch(geo, case.N2)
    else:
        bf, bg = case.boxes()
        f, g = box_patch(geo, bf), box_patch(geo, bg)
    return ExtremizerPair(case, f, g, f.norm(), g.norm())


@dataclass(frozen=True)
class LowerBoundResult:
    case: ExtremizerCase
    lhs: float
    k_pred: float
    norm_f: float
    norm_g: float
    steps: int
    ratio: float
    degenerate: bool = False


def lower_bound_check(case, w=None):
    """r = ||U P_{N1} f U P_{N2} g||_{L^2} / (K^{1/2} ||f|| ||g||) on the window.

    Norms in the denominator are those of the unprojected box data.  Zero
    data give r = 0 with ``degenerate`` set.
    """
    pair = build_pair(case)
    geo = pair.f.geometry
    K = float(predicted_constant(geo.m, geo.n, _num(geo.lam), case.N1, case.N2))
    if pair.norm_f == 0 or pair.norm_g == 0:
        return LowerBoundResult(case, 0.0, K, pair.norm_f, pair.norm_g, 0, 0.0, True)
    t0, t1 = case.time_window
    if w is None:
        steps = support_steps(pair.f, pair.g, case.N1, case.N2, t1 - t0,
                              samples_per_period=case.samples_per_period)
        w = TimeWindow(t0, t1, steps)
    check_no_wrap(pair.f, max(abs(w.t_start), abs(w.t_end)))
    check_no_wrap(pair.g, max(abs(w.t_start), abs(w.t_end)))
    lhs = spacetime_l2_product(pair.f, pair.g, case.N1, case.N2, w)
    r = lhs / (math.sqrt(K) * pair.norm_f * pair.norm_g)
    return LowerBoundResult(case, lhs, K, pair.norm_f, pair.norm_g, w.steps, r)


def ladder_stability(results):
    """min(r) / max(r) over the non-degenerate members of a ladder."""
    r = np.array([x.ratio for x in results if not x.degenerate])
    if len(r) == 0 or r.max() <= 0:
        return 0.0
    return float(r.min() / r.max())


def _num(x):
    return int(x) if float(x).is_integer() else float(x)


# -- packet transport --------------------------------------------------------

def envelope_marginal(p, t, axis=0, oversample=4):
    """x -> int |U(t) p|^2 over the other directions, sampled along ``axis``.

    Plancherel in the other directions turns the marginal into a sum of
    one-dimensional intensities, so no full grid is ever built.
    Returns (x, density) with x in [-P/2, P/2).
    """
    p = as_patch(p)
    geo = p.geometry
    P = geo.circumferences[axis]
    xi = p.frequencies(axis)
    v = np.moveaxis(p.values, axis, 0).reshape(p.shape[axis], -1)
    v = v * np.exp(-4j * np.pi ** 2 * t * xi * xi)[:, None]
    G = sfft.next_fast_len(max(oversample * p.shape[axis], 64))
    buf = np.zeros((G, v.shape[1]), dtype=complex)
    buf[(p.origin[axis] + np.arange(p.shape[axis])) % G] = v
    u = sfft.ifft(buf, axis=0, norm="forward") / P
    dens = np.sum(np.abs(u) ** 2, axis=1) * geo.frequency_weight * P
    x = np.arange(G) * P / G
    x = np.where(x >= P / 2, x - P, x)
    order = np.argsort(x)
    return x[order], dens[order]


def packet_peak(p, t, axis=0):
    """Location of the maximum of ``envelope_marginal``, unwrapped near 4 pi xi_c t."""
    p = as_patch(p)
    x, dens = envelope_marginal(p, t, axis)
    P = p.geometry.circumferences[axis]
    w = np.abs(p.values) ** 2
    other = tuple(a for a in range(p.geometry.d) if a != axis)
    wa = w.sum(axis=other) if other else w
    xc = float(np.sum(p.frequencies(axis) * wa) / np.sum(wa))
    x0 = x[int(np.argmax(dens))]
    guess = 4 * np.pi * xc * t
    return x0 + P * round((guess - x0) / P)


# -- global-in-time failure --------------------------------------------------

@dataclass(frozen=True)
class GrowthTable:
    T: np.ndarray
    bilinear_norm: np.ndarray     # ||U P f U P g||_{L^2([0, T])}
    l4_fourth: np.ndarray         # ||e^{it Delta} phi||_{L^4([0, T] x R)}^4
    intercept: float
    slope: float                  # b in a + b log T
    relative_residual: float      # max |residual| / fitted range


def global_failure_demo(lam, N1, N2, T_list=(10, 100, 1000, 10000), box_length=2.0 ** 18,
                        steps_per_window=128, n=1):
    """Growth of the bilinear norm over [0, T] for phi-based data on R x T_lam.

    The torus factor is a single mode, so lhs^2 = lam^n ||e^{it Delta} phi||_{L^4}^4.
    Windows between consecutive entries of T_list (with extra decades
    starting from 1) each get ``steps_per_window`` trapezoid panels.
    """
    T_list = np.asarray(sorted(T_list), dtype=float)
    if len(T_list) < 3:
        raise PreconditionError("need at least three horizons for the log fit")
    case = ExtremizerCase("global-failure", lam, N1, N2, m=1, n=n, box_length=box_length)
    pair = build_pair(case)
    check_no_wrap(pair.f, T_list[-1])
    bp = _log_breakpoints(T_list)
    prof = spacetime_l2_profile(pair.f, pair.g, N1, N2, bp, steps_per_window)
    keep = np.isin(bp[1:], T_list)
    norms = prof[keep]
    fourth = norms ** 2 / float(lam) ** n
    fit = fit_scaling(T_list, fourth, "log")
    span = abs(fit.fitted[-1] - fit.fitted[0])
    rel = fit.max_residual / span if span > 0 else math.inf
    return GrowthTable(T_list, norms, fourth, float(fit.coefficients[0]),
                       float(fit.coefficients[1]), float(rel))


def _log_breakpoints(T_list):
    # 0, 1, 10, ... up to the first horizon, then the horizons themselves
    pts = [0.0]
    t = 1.0
    while t < T_list[0]:
        pts.append(t)
        t *= 10.0
    pts.extend(T_list)
    return np.unique(pts)


@dataclass(frozen=True)
class DecayProfile:
    t: np.ndarray
    values: np.ndarray            # min over |x| <= t/1000 of sqrt(t) |U(t) phi(x)|
    anchor: float
    max_drift: float              # max over t of max(v/anchor, anchor/v)
    degenerate: bool = False


def phi_field(box_length=2.0 ** 18, grid_points=2 ** 20):
    """phi = P_{<=1/2}(exp(-x^2)) as a dense field on R."""
    geo = Geometry(1, 0, 1.0, box_length, (grid_points,))
    return SpectralField.from_spectrum(geo, phi_hat)


def decay_profile(phi, t_list=(10, 100, 1000, 10000), rel_tol=1e-8):
    """sqrt(t) |U(t) phi| on the cone |x| <= t/1000, anchored at the first time."""
    t_list = np.asarray(t_list, dtype=float)
    if phi.geometry.m != 1:
        raise PreconditionError("decay profile needs one real direction")
    F = phi.to_frequency()
    if not np.any(F.values):
        z = np.zeros(len(t_list))
        return DecayProfile(t_list, z, 0.0, math.inf, True)
    check_no_wrap(F, t_list.max(), rel_tol)
    x = F.geometry.axis_coordinates()[0]
    out = []
    for t in t_list:
        u = propagate(F, t).to_physical().values
        u = u.reshape(len(x), -1)
        near = np.abs(x) <= t / 1000.0
        if not near.any():
            near = np.abs(x) == np.abs(x).min()
        out.append(math.sqrt(t) * float(np.abs(u[near]).min()))
    v = np.array(out)
    anchor = v[0]
    drift = float(np.max(np.maximum(v / anchor, anchor / v))) if anchor > 0 else math.inf
    return DecayProfile(t_list, v, float(anchor), drift)
