"""Measure of paraboloid-shell / annulus intersections on R x Z_{1/lam}.

For a frequency eta with |eta| ~ N1 and a level tau, the set

    C = { xi : N2/2 <= |xi| <= 2 N2,  | |xi|^2 + |eta - xi|^2 - tau | <= h }

is sliced along the discrete direction xi_2 = k/lam.  Completing the
square, |xi|^2 + |eta - xi|^2 = 2 |xi - eta/2|^2 + |eta|^2/2, so on the
slice the condition reads |(xi_1 - eta_1/2)^2 - mu_k| <= h/2 with

    mu_k = tau/2 - |eta|^2/4 - (k/lam - eta_2/2)^2.

Each slice is a union of at most two intervals, intersected exactly with
the annulus section, and weighted 1/lam.  For (m, n) = (2, 1) the extra
real coordinate is integrated numerically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, UnsupportedRegimeError


@dataclass(frozen=True)
class CountingInstance:
    """One (eta, tau) query; ``eta`` lists real components first, torus last."""

    m: int
    n: int
    lam: float
    N1: float
    N2: float
    eta: tuple
    tau: float
    thickness: float = 1.0

    def __post_init__(self):
        eta = tuple(float(e) for e in self.eta)
        object.__setattr__(self, "eta", eta)
        if len(eta) != self.m + self.n:
            raise PreconditionError("eta must have m + n components")
        if not self.thickness > 0:
            raise PreconditionError("thickness must be positive")
        if not self.lam > 0:
            raise PreconditionError("lam must be positive")
        r = math.hypot(*eta)
        if not (self.N1 / 2 - 1e-12 <= r <= 2 * self.N1 + 1e-12):
            raise PreconditionError(f"|eta| = {r:g} outside [N1/2, 2 N1]")

    @property
    def eta_norm2(self):
        return float(sum(e * e for e in self.eta))


@dataclass(frozen=True)
class SliceProfile:
    k: int
    mu_k: float
    length: float = float("nan")


def _require_11(inst):
    if (inst.m, inst.n) != (1, 1):
        raise UnsupportedRegimeError(f"slice formulas need (m, n) = (1, 1), got ({inst.m}, {inst.n})")


def mu_values(inst, ks):
    _require_11(inst)
    ks = np.asarray(ks, dtype=float)
    return inst.tau / 2 - inst.eta_norm2 / 4 - (ks / inst.lam - inst.eta[1] / 2) ** 2


def mu_difference(inst, k):
    """mu_{k+1} - mu_k = -(2k + 1)/lam^2 + eta_2/lam."""
    _require_11(inst)
    return -(2 * np.asarray(k, dtype=float) + 1) / inst.lam ** 2 + inst.eta[1] / inst.lam


def mu_sequence(inst, k_range):
    """Slice profiles (mu only) for the integers in ``k_range``."""
    ks = np.asarray(list(k_range), dtype=int)
    mus = mu_values(inst, ks)
    return [SliceProfile(int(k), float(mu)) for k, mu in zip(ks, mus)]


def slice_length_closed_form(mu, thickness):
    """Measure of {x : |(x - a)^2 - mu| <= thickness/2} (independent of a)."""
    if np.any(np.asarray(thickness) <= 0):
        raise PreconditionError("thickness must be positive")
    mu = np.asarray(mu, dtype=float)
    h2 = np.asarray(thickness, dtype=float) / 2
    outer = 2 * np.sqrt(np.maximum(mu + h2, 0.0))
    inner = 2 * np.sqrt(np.maximum(mu - h2, 0.0))
    out = np.where(mu < -h2, 0.0, outer - inner)
    return out if out.ndim else float(out)


def _overlap(a0, a1, b0, b1):
    return np.maximum(0.0, np.minimum(a1, b1) - np.maximum(a0, b0))


def slice_in_annulus(center, mu, h, s_lo, s_hi):
    """Length of {x : |(x - center)^2 - mu| <= h/2, s_lo <= |x| <= s_hi}.

    All arguments broadcast.  Empty pieces are encoded by s_hi < s_lo or
    mu < -h/2.
    """
    mu = np.asarray(mu, dtype=float)
    r_hi = np.sqrt(np.maximum(mu + h / 2, 0.0))
    r_lo = np.sqrt(np.maximum(mu - h / 2, 0.0))
    live = (mu >= -h / 2) & (s_hi >= s_lo)
    total = 0.0
    shell = ((center - r_hi, center - r_lo), (center + r_lo, center + r_hi))
    ring = ((-s_hi, -s_lo), (s_lo, s_hi))
    for a0, a1 in shell:
        for b0, b1 in ring:
            total = total + _overlap(a0, a1, b0, b1)
    # the two shell pieces touch at x = center when r_lo = 0; same for the ring at 0
    return np.where(live, total, 0.0)


def _annulus_section(N2, rest2):
    """|x| range on a line whose other coordinates have squared norm ``rest2``."""
    s_hi = np.sqrt(np.maximum(4 * N2 ** 2 - rest2, 0.0))
    s_lo = np.sqrt(np.maximum(N2 ** 2 / 4 - rest2, 0.0))
    s_hi = np.where(rest2 > 4 * N2 ** 2, -1.0, s_hi)
    return s_lo, s_hi


def torus_indices(lam, N2):
    kmax = int(math.floor(2 * N2 * lam + 1e-9))
    return np.arange(-kmax, kmax + 1)


def slice_profiles(inst):
    """mu_k and the annulus-restricted slice length for every admissible k."""
    _require_11(inst)
    ks = torus_indices(inst.lam, inst.N2)
    mus = mu_values(inst, ks)
    s_lo, s_hi = _annulus_section(inst.N2, (ks / inst.lam) ** 2)
    lengths = slice_in_annulus(inst.eta[0] / 2, mus, inst.thickness, s_lo, s_hi)
    return [SliceProfile(int(k), float(mu), float(l)) for k, mu, l in zip(ks, mus, lengths)]


def measure_C(inst, quad_points=4096):
    """|C| under (d xi)_lam; exact for (1, 1), outer quadrature over xi_2 for (2, 1)."""
    if (inst.m, inst.n) == (1, 1):
        return float(measure_C_batch(inst.lam, inst.N2, np.array([inst.eta]),
                                     np.array([inst.tau]), inst.thickness)[0])
    if (inst.m, inst.n) == (2, 1):
        return _measure_21(inst, quad_points)
    raise UnsupportedRegimeError(
        f"measure_C supports (1, 1) and (2, 1), got ({inst.m}, {inst.n})")


def measure_C_batch(lam, N2, etas, taus, thickness=1.0):
    """Vectorized (1, 1) measure for many (eta, tau) pairs sharing lam, N2."""
    etas = np.asarray(etas, dtype=float).reshape(-1, 2)
    taus = np.asarray(taus, dtype=float).reshape(-1)
    ks = torus_indices(lam, N2)
    y = ks / lam
    s_lo, s_hi = _annulus_section(N2, y ** 2)
    e2 = (etas ** 2).sum(axis=1)
    mus = (taus / 2 - e2 / 4)[:, None] - (y[None, :] - etas[:, 1:2] / 2) ** 2
    lengths = slice_in_annulus(etas[:, 0:1] / 2, mus, thickness, s_lo[None], s_hi[None])
    return lengths.sum(axis=1) / lam


def _measure_21(inst, quad_points):
    # xi = (x1, x2, k/lam); integrate the x1-slice length over x2 by the midpoint rule
    e1, e2, e3 = inst.eta
    N2, lam, h = inst.N2, inst.lam, inst.thickness
    ks = torus_indices(lam, N2)
    y = ks / lam
    edges = np.linspace(-2 * N2, 2 * N2, quad_points + 1)
    x2 = 0.5 * (edges[1:] + edges[:-1])
    dx = edges[1] - edges[0]
    total = 0.0
    for yk in y:
        mu = inst.tau / 2 - inst.eta_norm2 / 4 - (x2 - e2 / 2) ** 2 - (yk - e3 / 2) ** 2
        s_lo, s_hi = _annulus_section(N2, x2 ** 2 + yk ** 2)
        total += slice_in_annulus(e1 / 2, mu, h, s_lo, s_hi).sum() * dx
    return total / lam


def measure_C_bruteforce(inst, step=None, chunk=1 << 22):
    """Dense-grid count of the defining inequalities (independent oracle).

    Cells of width ``step`` (default 1/(64 N1)) tile [-2 N2, 2 N2] in each
    real direction; a cell counts when its midpoint satisfies both
    conditions.  Lines k/lam on which the shell cannot be reached
    (minimum of |xi|^2 + |eta - xi|^2 above tau + h) are skipped.
    """
    if (inst.m, inst.n) not in ((1, 1), (2, 1)):
        raise UnsupportedRegimeError("brute force covers (1, 1) and (2, 1)")
    step = step or 1.0 / (64 * inst.N1)
    N2, lam, h, tau = inst.N2, inst.lam, inst.thickness, inst.tau
    eta = np.array(inst.eta)
    ncell = int(math.ceil(4 * N2 / step))
    x = -2 * N2 + (np.arange(ncell) + 0.5) * step
    total = 0
    for k in torus_indices(lam, N2):
        yk = k / lam
        # the phase function is minimized at xi = eta/2 along the free directions
        low = 2 * (yk - eta[-1] / 2) ** 2 + eta @ eta / 2
        if low > tau + h:
            continue
        if inst.m == 1:
            r2 = x ** 2 + yk ** 2
            phi = r2 + (eta[0] - x) ** 2 + (eta[1] - yk) ** 2
            ok = (r2 >= N2 ** 2 / 4) & (r2 <= 4 * N2 ** 2) & (np.abs(phi - tau) <= h)
            total += int(ok.sum())
        else:
            rows = max(1, chunk // ncell)
            for s in range(0, ncell, rows):
                x1 = x[s:s + rows, None]
                r2 = x1 ** 2 + x[None, :] ** 2 + yk ** 2
                phi = (r2 + (eta[0] - x1) ** 2 + (eta[1] - x[None, :]) ** 2
                       + (eta[2] - yk) ** 2)
                ok = (r2 >= N2 ** 2 / 4) & (r2 <= 4 * N2 ** 2) & (np.abs(phi - tau) <= h)
                total += int(ok.sum())
    return total * step ** inst.m / lam


def slice_length_bruteforce(mu, thickness, step=1e-5, center=0.0):
    """Grid-count quadrature of a single slice, for cross-checking."""
    R = math.sqrt(max(mu + thickness / 2, 0.0)) + 2 * step
    n = int(math.ceil(2 * R / step))
    x = center - R + (np.arange(n) + 0.5) * step
    ok = np.abs((x - center) ** 2 - mu) <= thickness / 2
    return ok.sum() * step


def _tau_range(eta_norm, N2, h):
    # phi = 2|xi - eta/2|^2 + |eta|^2/2 over the annulus
    D = eta_norm / 2
    dmin = max(0.0, D - 2 * N2, N2 / 2 - D)
    dmax = D + 2 * N2
    return eta_norm ** 2 / 2 + 2 * dmin ** 2 - h, eta_norm ** 2 / 2 + 2 * dmax ** 2 + h


def _random_etas(lam, N1, count, rng):
    """Random eta in R x Z_{1/lam} with |eta| uniform in [N1/2, 2 N1]."""
    r = rng.uniform(N1 / 2, 2 * N1, count)
    th = rng.uniform(0, 2 * np.pi, count)
    e2 = np.trunc(r * np.sin(th) * lam) / lam   # rounds toward 0, so |e2| <= r
    e1 = np.sign(np.cos(th)) * np.sqrt(np.maximum(r ** 2 - e2 ** 2, 0.0))
    return np.stack([e1, e2], axis=1)


@dataclass
class SupResult:
    lam: float
    N1: float
    N2: float
    sup: float
    eta: tuple
    tau: float
    evaluated: int


def adversarial_taus(eta, lam, N2, h=1.0, max_lines=64, scan=64):
    """Candidate tau values for one eta: mu_k resonances, tangencies, a scan."""
    eta = np.asarray(eta, dtype=float)
    e2 = eta @ eta
    out = []
    ks = torus_indices(lam, N2)
    if len(ks) > max_lines:
        ks = ks[np.linspace(0, len(ks) - 1, max_lines).round().astype(int)]
    for target in (-h / 2, 0.0, h / 4, h / 2, 1.0):
        out.extend(2 * (target + (ks / lam - eta[1] / 2) ** 2 + e2 / 4))
    D = math.sqrt(e2) / 2
    for r in (N2 / 2, 2 * N2):
        for rho in (abs(D - r), D + r):
            for dt in (-h, -h / 2, 0.0, h / 2, h):
                out.append(2 * rho ** 2 + e2 / 2 + dt)
    lo, hi = _tau_range(math.sqrt(e2), N2, h)
    out.extend(np.linspace(lo, hi, scan))
    return np.array(out)


def measure_C_sup(lam, N1, N2, draws=1000, rng=None, thickness=1.0, adversarial_etas=16):
    """Largest |C| found over random and adversarial (eta, tau) for (m, n) = (1, 1)."""
    if draws < 100:
        raise PreconditionError("measure_C_sup needs at least 100 draws")
    rng = rng if rng is not None else np.random.default_rng(0)
    etas = _random_etas(lam, N1, draws, rng)
    taus = np.empty(draws)
    for i, e in enumerate(etas):
        lo, hi = _tau_range(math.hypot(*e), N2, thickness)
        taus[i] = rng.uniform(lo, hi)
    # adversarial: axis-aligned and random eta with tuned tau
    special = [np.array([N1, 0.0]), np.array([0.0, N1]), np.array([-N1, 0.0]),
               np.array([0.0, -N1]), np.array([N1 / 2, 0.0]), np.array([0.0, N1 / 2])]
    special += [np.array([0.0, 2.0 * N1]), np.array([2.0 * N1, 0.0])]
    special += list(etas[:max(0, adversarial_etas - len(special))])
    adv_eta, adv_tau = [], []
    for e in special:
        e = np.array([e[0], round(e[1] * lam) / lam])
        if not (N1 / 2 <= math.hypot(*e) <= 2 * N1):
            continue
        ts = adversarial_taus(e, lam, N2, thickness)
        adv_eta.append(np.repeat(e[None], len(ts), axis=0))
        adv_tau.append(ts)
    all_eta = np.concatenate([etas] + adv_eta)
    all_tau = np.concatenate([taus] + adv_tau)
    vals = np.concatenate([measure_C_batch(lam, N2, all_eta[s:s + 256], all_tau[s:s + 256],
                                           thickness)
                           for s in range(0, len(all_tau), 256)])
    i = int(np.argmax(vals))
    return SupResult(lam, N1, N2, float(vals[i]), tuple(all_eta[i]), float(all_tau[i]),
                     len(vals))
