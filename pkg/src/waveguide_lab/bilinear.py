"""Space-time norms of free evolutions and the predicted constants K.

The bilinear norm ||U(t)P_{N1}f U(t)P_{N2}g||_{L^2(z,t)} is evaluated
exactly in space and by the composite trapezoid rule in time.

Spatial exactness comes from working on the frequency support only.  Each
projected spectrum is cropped to a lattice box and written as a carrier
plus offsets, u_i = e^{i phase} V_i(z - 4 pi c_i t, t).  The integrand
only sees |V_1(z - 4 pi (c_1 - c_2) t)|^2 |V_2(z)|^2, and the product
V_1 V_2 is a trigonometric polynomial whose spectrum fits in
W_1 + W_2 - 1 lattice sites per direction.  Sampling it on that many
points (rounded up to a power of two) gives the spatial integral with no
aliasing, however large the carriers are.
"""
from __future__ import annotations

import math
import time as _time
from dataclasses import asdict, dataclass
from fractions import Fraction

import numpy as np
import scipy.fft as sfft

from .errors import PreconditionError, StructuralError, UnsupportedRegimeError, WraparoundError
from .littlewood_paley import as_band, project_band
from .spectral import Geometry, SpectralPatch, as_patch, next_pow2

# elements per batched FFT buffer
_BATCH_BUDGET = 1 << 22


@dataclass(frozen=True)
class TimeWindow:
    """[t_start, t_end] split into ``steps`` trapezoid panels."""

    t_start: float
    t_end: float
    steps: int

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise PreconditionError("TimeWindow needs t_end > t_start")
        if int(self.steps) < 16:
            raise PreconditionError("TimeWindow needs at least 16 steps")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def length(self):
        return self.t_end - self.t_start

    def nodes(self):
        return np.linspace(self.t_start, self.t_end, self.steps + 1)


@dataclass
class EstimateRecord:
    m: int
    n: int
    lam: float
    L: float
    N1: int
    N2: int
    T: float
    steps: int
    lhs: float
    norm_f: float
    norm_g: float
    k_pred: float
    ratio: float
    seconds: float = 0.0

    def as_row(self):
        row = asdict(self)
        row["lambda"] = row.pop("lam")
        return row


def predicted_constant(m, n, lam, N1, N2):
    """K(lam, N1, N2) for the supported (m, n) regimes.

    m = n = 1:  1/lam + N2/N1
    d >= 3 with m >= 2:  N2^(d-3)/lam + N2^(d-1)/N1

    Integer or Fraction inputs give an exact Fraction.
    """
    if not N1 >= N2 >= 1:
        raise PreconditionError("need N1 >= N2 >= 1")
    if not lam > 0:
        raise PreconditionError("lam must be positive")
    d = m + n
    exact = all(isinstance(v, (int, Fraction)) for v in (lam, N1, N2))
    num = Fraction if exact else float
    lam_, N1_, N2_ = num(lam), num(N1), num(N2)
    if m == 1 and n == 1:
        return 1 / lam_ + N2_ / N1_
    if d >= 3 and m >= 2 and n >= 1:
        return N2_ ** (d - 3) / lam_ + N2_ ** (d - 1) / N1_
    raise UnsupportedRegimeError(
        f"no predicted constant for (m, n) = ({m}, {n}); "
        "supported: (1, 1) and d >= 3 with m >= 2, n >= 1")


class PairIntegrand:
    """t -> int |U(t)a|^2 |U(t)b|^2 dz for two lattice patches.

    Works in the rest frame of ``b``; see the module docstring.
    """

    def __init__(self, a, b):
        if a.geometry != b.geometry:
            raise StructuralError("patches live on different geometries")
        geo = a.geometry
        self.geometry = geo
        self.zero = not (np.any(a.values) and np.any(b.values))
        self.same = a is b
        circ = geo.circumferences
        # any FFT-friendly length >= W_a + W_b - 1 samples the product exactly
        self.grid = tuple(sfft.next_fast_len(wa + wb - 1)
                          for wa, wb in zip(a.shape, b.shape))
        self.offsets_a, self.offsets_b = [], []
        drift = []
        for ax, P in enumerate(circ):
            ca = a.origin[ax] + (a.shape[ax] - 1) // 2
            cb = b.origin[ax] + (b.shape[ax] - 1) // 2
            ja = a.origin[ax] + np.arange(a.shape[ax]) - ca
            jb = b.origin[ax] + np.arange(b.shape[ax]) - cb
            self.offsets_a.append(ja / P)
            self.offsets_b.append(jb / P)
            drift.append((ca - cb) / P)
        self.drift = np.array(drift)
        self.a = a.values
        self.b = b.values
        w = geo.frequency_weight
        cells = int(np.prod(self.grid))
        # |V|^2 products carry w^4; the physical cell is vol / cells
        self.scale = w ** 4 * geo.volume / cells
        self.cells = cells

    def _phased(self, values, offsets, times, drift):
        out = values[None]
        d = len(offsets)
        for ax, x in enumerate(offsets):
            q = x * x + 2.0 * x * drift[ax]
            ph = np.exp(-4j * np.pi ** 2 * np.outer(times, q))
            shape = [len(times)] + [1] * d
            shape[ax + 1] = len(x)
            out = out * ph.reshape(shape)
        return out

    def _intensity(self, values):
        # zero-padding at the end instead of centring only multiplies the
        # physical samples by a unimodular phase, which |.|^2 removes
        axes = tuple(range(1, values.ndim))
        v = sfft.ifftn(values, s=self.grid, axes=axes, norm="forward", overwrite_x=True)
        return v.real ** 2 + v.imag ** 2

    def __call__(self, times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros(len(times))
        if self.zero:
            return out
        chunk = max(1, _BATCH_BUDGET // self.cells)
        zero_drift = np.zeros_like(self.drift)
        for s in range(0, len(times), chunk):
            t = times[s:s + chunk]
            ia = self._intensity(self._phased(self.a, self.offsets_a, t, self.drift))
            if self.same:
                ib = ia
            else:
                ib = self._intensity(self._phased(self.b, self.offsets_b, t, zero_drift))
            out[s:s + chunk] = np.einsum("ij,ij->i", ia.reshape(len(t), -1),
                                         ib.reshape(len(t), -1)) * self.scale
        return out


    def omega(self):
        """Fastest angular frequency present in the integrand."""
        total = 0.0
        for offs, drift in ((self.offsets_a, self.drift), (self.offsets_b, 0 * self.drift)):
            for ax, x in enumerate(offs):
                q = x * x + 2 * x * drift[ax]
                total += q.max() - q.min()
        return 4 * np.pi ** 2 * total


def rank_one_factors(values, rel_tol=1e-12):
    """Per-axis vectors whose outer product is ``values``, or None."""
    v = np.asarray(values)
    if v.ndim == 1:
        return [v]
    peak = np.unravel_index(np.argmax(np.abs(v)), v.shape)
    pivot = v[peak]
    if pivot == 0:
        return None
    factors = []
    for ax in range(v.ndim):
        idx = list(peak)
        idx[ax] = slice(None)
        factors.append(v[tuple(idx)] / (pivot if ax else 1.0))
    recon = factors[0]
    for fac in factors[1:]:
        recon = np.multiply.outer(recon, fac)
    if np.max(np.abs(recon - v)) > rel_tol * abs(pivot):
        return None
    return factors


def _axis_patch(p, ax, vec):
    geo = p.geometry
    real = ax < geo.m
    g1 = Geometry(1 if real else 0, 0 if real else 1, geo.lam, geo.box_length,
                  (geo.grid_points[ax],))
    return SpectralPatch(g1, (p.origin[ax],), np.asarray(vec, dtype=complex))


class SeparableIntegrand:
    """Tensor-product data: the spatial integral splits into 1-D factors.

    Each factor is a one-dimensional ``PairIntegrand``; the product over
    axes is exact, so huge real boxes cost only a few 1-D FFTs per node.
    """

    def __init__(self, a, b, fa, fb):
        self.factors = []
        for ax, (u, v) in enumerate(zip(fa, fb)):
            pa = _axis_patch(a, ax, u)
            pb = pa if a is b else _axis_patch(b, ax, v)
            self.factors.append(PairIntegrand(pa, pb))

    def __call__(self, times):
        times = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.ones(len(times))
        for eng in self.factors:
            out *= eng(times)
        return out

    def omega(self):
        return sum(eng.omega() for eng in self.factors)


def integrand(a, b):
    """Pick the cheapest exact engine for the pair (a, b)."""
    if a.geometry.d > 1 and np.any(a.values) and np.any(b.values):
        fa, fb = rank_one_factors(a.values), rank_one_factors(b.values)
        if fa is not None and fb is not None:
            return SeparableIntegrand(a, b, fa, fb)
    return PairIntegrand(a, b)


def _ordered(p, q):
    # canonical ordering makes (f, g) and (g, f) evaluate identically
    kp = (p.shape, p.origin, p.values.tobytes())
    kq = (q.shape, q.origin, q.values.tobytes())
    return (p, q) if kp >= kq else (q, p)


def cumulative_integral(integrand, breakpoints, steps):
    """Trapezoid integrals of ``integrand`` from breakpoints[0] to each breakpoint.

    ``steps`` is one panel count per segment (or a single int).
    """
    bp = np.asarray(breakpoints, dtype=float)
    if np.any(np.diff(bp) <= 0):
        raise PreconditionError("breakpoints must increase")
    steps = np.broadcast_to(np.asarray(steps, dtype=int), (len(bp) - 1,))
    windows = [TimeWindow(t0, t1, s) for t0, t1, s in zip(bp[:-1], bp[1:], steps)]
    nodes = np.concatenate([w.nodes()[:-1] for w in windows] + [bp[-1:]])
    vals = integrand(nodes)
    out = [0.0]
    pos = 0
    for w in windows:
        seg = vals[pos:pos + w.steps + 1]
        h = w.length / w.steps
        out.append(out[-1] + h * (seg.sum() - 0.5 * (seg[0] + seg[-1])))
        pos += w.steps
    return np.array(out), nodes, vals


def _projected_pair(f, g, N1, N2):
    pf = as_patch(project_band(as_patch(f), as_band(N1)))
    pg = as_patch(project_band(as_patch(g), as_band(N2)))
    return _trim(pf), _trim(pg)


def _trim(p):
    # drop rows the cutoff zeroed so the compact grid stays small
    if not np.any(p.values):
        return p
    return p.trimmed()


def spacetime_l2_product(f, g, N1, N2, w):
    """||U(t)P_{N1}f U(t)P_{N2}g||_{L^2} over the window ``w``.

    ``f`` and ``g`` may be dense fields or lattice patches on the same
    geometry.  Content at a Nyquist frequency raises ``BandLimitError``
    naming the direction.
    """
    pf, pg = _projected_pair(f, g, N1, N2)
    a, b = _ordered(pf, pg)
    total, _, _ = cumulative_integral(integrand(a, b), [w.t_start, w.t_end], w.steps)
    return float(np.sqrt(max(total[-1], 0.0)))


def spacetime_l2_profile(f, g, N1, N2, breakpoints, steps):
    """Bilinear norms over [breakpoints[0], T] for every later breakpoint T."""
    pf, pg = _projected_pair(f, g, N1, N2)
    a, b = _ordered(pf, pg)
    total, _, _ = cumulative_integral(integrand(a, b), breakpoints, steps)
    return np.sqrt(np.maximum(total[1:], 0.0))


def strichartz_l4(f, w):
    """||U(t)f||_{L^4(z, t)} over the window ``w``."""
    p = _trim(as_patch(f))
    total, _, _ = cumulative_integral(integrand(p, p), [w.t_start, w.t_end], w.steps)
    return float(max(total[-1], 0.0) ** 0.25)


def strichartz_l4_profile(f, breakpoints, steps):
    """Fourth powers of the L^4 norm over [breakpoints[0], T] for later T."""
    p = _trim(as_patch(f))
    total, _, _ = cumulative_integral(integrand(p, p), breakpoints, steps)
    return np.maximum(total[1:], 0.0)


def phase_rule_steps(N1, T):
    """The 64 N1^2 T panel rule for the time quadrature."""
    return int(max(16, math.ceil(64 * N1 ** 2 * T)))


def support_steps(f, g, N1, N2, T, samples_per_period=8, cap=None):
    """Panel count resolving the fastest temporal frequency of the integrand.

    In the rest frame of g the integrand oscillates at most at
    4 pi^2 (q_max - q_min) for each factor, where q = |xi'|^2 + 2 xi'.delta.
    """
    pf, pg = _projected_pair(f, g, N1, N2)
    a, b = _ordered(pf, pg)
    omega = integrand(a, b).omega()
    steps = int(math.ceil(omega * T / (2 * np.pi) * samples_per_period))
    steps = max(16, steps)
    if cap is not None:
        steps = min(steps, int(cap))
    return steps


def check_no_wrap(f, T, rel_tol=1e-8):
    """Raise ``WraparoundError`` if content moves more than L/2 within [0, T].

    Group velocity of a mode is 4 pi xi; sites below ``rel_tol`` of the peak
    amplitude are ignored.
    """
    p = as_patch(f)
    geo = p.geometry
    vmax = 4 * np.pi * p.max_abs_frequency(rel_tol)
    for ax in range(geo.m):
        if vmax[ax] * T > geo.box_length / 2:
            raise WraparoundError(
                f"content at speed {vmax[ax]:.3g} wraps {geo.axis_name(ax)} before "
                f"T = {T:g}; enlarge L beyond {2 * vmax[ax] * T:.3g}")


def packet_geometry(m, n, lam, box_length, edges):
    """Metadata geometry whose Nyquist exceeds ``edges`` in every direction."""
    edges = np.broadcast_to(np.asarray(edges, dtype=float), (m + n,))
    circ = [box_length] * m + [lam] * n
    gp = tuple(max(4, next_pow2(2 * e * P + 2)) for e, P in zip(edges, circ))
    return Geometry(m, n, lam, box_length, gp)


def _sites(center, width, P, open_ends=False):
    """Integer lattice indices k with |k/P - center| <= width/2 (< if open_ends)."""
    if width <= 0:
        return np.array([int(round(center * P))])
    eps = -1e-9 if open_ends else 1e-9
    lo = math.ceil((center - width / 2) * P - eps)
    hi = math.floor((center + width / 2) * P + eps)
    return np.arange(lo, hi + 1)


def random_packet(geometry, scale, rng, real_width=1.0, torus_width=1.0,
                  axis=None, sign=None, shift=1.0, profile="bump"):
    """Random-phase packet centred at ``sign * scale`` along ``axis``.

    Periodic directions carry independent unit-modulus phases on every site
    within ``torus_width`` of the centre (one site if the width is 0).
    Real directions carry a smooth amplitude on ``real_width`` with a random
    translation in [-shift, shift], which keeps the packet localized.
    ``profile`` is ``"bump"`` (cos^2 window) or ``"box"`` (indicator).
    """
    geo = geometry
    d = geo.d
    if axis is None:
        axis = d - 1
    if sign is None:
        sign = 1 if rng.random() < 0.5 else -1
    center = np.zeros(d)
    center[axis] = sign * scale
    circ = geo.circumferences
    ks, amps = [], []
    for ax in range(d):
        width = torus_width if geo.is_periodic(ax) else real_width
        # the cos^2 window vanishes at its ends, so drop those sites
        bump = profile == "bump" and not geo.is_periodic(ax)
        k = _sites(center[ax], width, circ[ax], open_ends=bump)
        ks.append(k)
        xi = k / circ[ax]
        if geo.is_periodic(ax) or width <= 0:
            amps.append(np.ones(len(k), dtype=complex))
            continue
        if profile == "bump":
            amp = np.cos(np.pi * (xi - center[ax]) / width) ** 2
        else:
            amp = np.ones(len(k))
        x0 = rng.uniform(-shift, shift)
        amps.append(amp * np.exp(-2j * np.pi * xi * x0))
    values = amps[0].reshape([-1] + [1] * (d - 1))
    for ax in range(1, d):
        shape = [1] * d
        shape[ax] = -1
        values = values * amps[ax].reshape(shape)
    values = np.array(np.broadcast_to(values, tuple(len(k) for k in ks)), dtype=complex)
    torus_axes = [ax for ax in range(d) if geo.is_periodic(ax)]
    if torus_axes:
        tshape = [len(ks[ax]) if ax in torus_axes else 1 for ax in range(d)]
        values *= np.exp(2j * np.pi * rng.random(tshape))
    return SpectralPatch(geo, tuple(int(k[0]) for k in ks), values)


def estimate_record(f, g, N1, N2, w, geometry=None, norm_f=None, norm_g=None):
    """Evaluate one bilinear sample and package it as an ``EstimateRecord``."""
    geo = geometry or as_patch(f).geometry
    t0 = _time.perf_counter()
    lhs = spacetime_l2_product(f, g, N1, N2, w)
    nf = as_patch(f).norm() if norm_f is None else norm_f
    ng = as_patch(g).norm() if norm_g is None else norm_g
    K = float(predicted_constant(geo.m, geo.n, _num(geo.lam), int(N1), int(N2)))
    denom = math.sqrt(K) * nf * ng
    ratio = lhs / denom if denom > 0 else float("nan")
    return EstimateRecord(geo.m, geo.n, geo.lam, geo.box_length, int(N1), int(N2),
                          w.length, w.steps, lhs, nf, ng, K, ratio,
                          _time.perf_counter() - t0)


def _num(x):
    return int(x) if float(x).is_integer() else float(x)
