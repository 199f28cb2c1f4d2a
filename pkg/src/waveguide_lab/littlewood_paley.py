"""Free Schroedinger propagator and Littlewood-Paley projectors.

All operators here are frequency multipliers, so they act on both dense
``SpectralField`` objects and ``SpectralPatch`` windows.  The cutoff is a
tensor product over directions, eta^d(xi) = prod_i eta_1(xi_i).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import PreconditionError
from .spectral import apply_multiplier, expand_axes


def _s(r):
    out = np.zeros_like(r)
    pos = r > 0
    out[pos] = np.exp(-1.0 / r[pos])
    return out


def smooth_step(r):
    """The standard C-infinity cutoff: 1 on [-1, 1], 0 outside [-2, 2]."""
    r = np.abs(np.asarray(r, dtype=float))
    a, b = _s(2.0 - r), _s(r - 1.0)
    out = np.where(r <= 1.0, 1.0, 0.0)
    mid = (r > 1.0) & (r < 2.0)
    out = np.where(mid, a / np.where(mid, a + b, 1.0), out)
    return out


@dataclass(frozen=True)
class CutoffSpec:
    """The one-dimensional profile eta_1 used to build eta^d."""

    profile: Callable = smooth_step

    def __call__(self, r):
        return self.profile(r)


@dataclass(frozen=True)
class DyadicBand:
    """A dyadic scale N = 2^j (j >= 0) together with its cutoff."""

    scale: int
    cutoff: CutoffSpec = field(default_factory=CutoffSpec)

    def __post_init__(self):
        s = self.scale
        if int(s) != s or s < 1 or (int(s) & (int(s) - 1)):
            raise PreconditionError(f"dyadic scale must be a power of two >= 1, got {s}")
        object.__setattr__(self, "scale", int(s))


def as_band(N):
    return N if isinstance(N, DyadicBand) else DyadicBand(N)


def project_leq_scale(f, scale, cutoff=None):
    """Multiply f_hat by eta^d(xi / scale) for any positive ``scale``.

    ``project_leq`` is the dyadic case; fractional scales give P_{<=1/2}
    and friends.
    """
    cutoff = cutoff or CutoffSpec()
    d = f.geometry.d
    return apply_multiplier(f, factors=[lambda x: cutoff(x / scale)] * d)


def project_leq(f, N):
    """P_{<=N}: multiply f_hat by eta^d(xi / N)."""
    band = as_band(N)
    return project_leq_scale(f, band.scale, band.cutoff)


def band_multiplier(freqs, scale, cutoff=None):
    """Values of eta^d(xi/N) - eta^d(2 xi/N) for per-axis frequency arrays."""
    cutoff = cutoff or CutoffSpec()
    return band_multiplier_grid(expand_axes(list(freqs)), scale, cutoff)


def project_band(f, N):
    """P_N = P_{<=N} - P_{<=N/2}, applied as a single multiplier."""
    band = as_band(N)
    return apply_multiplier(
        f, full=lambda xi: band_multiplier_grid(xi, band.scale, band.cutoff))


def band_multiplier_grid(xi, scale, cutoff):
    # xi: per-axis arrays already expanded for broadcasting
    hi = lo = 1.0
    for x in xi:
        hi = hi * cutoff(x / scale)
        lo = lo * cutoff(2.0 * x / scale)
    return hi - lo


def propagator_factors(d, t):
    """Per-axis factors of exp(-4 pi^2 i |xi|^2 t)."""
    c = -4.0 * np.pi ** 2 * t
    return [lambda x: np.exp(1j * c * x * x)] * d


def propagate(f, t):
    """U(t) f: multiply f_hat by exp(-4 pi^2 i |xi|^2 t)."""
    if t == 0:
        return f
    return apply_multiplier(f, factors=propagator_factors(f.geometry.d, t))
