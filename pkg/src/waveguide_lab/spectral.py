"""Discrete Fourier analysis on R^m x T^n_lambda.

Conventions
-----------
Directions are ordered real first, then periodic.  A real direction is
truncated to a torus of circumference ``L`` (``box_length``); a periodic
direction has circumference ``lam``.  Samples sit at ``z_j = -P/2 + j P/M``
so the origin is a grid point and ``f_hat(xi) = int f(z) exp(-2 pi i z.xi) dz``
is approximated by an exact lattice sum.

Frequency arrays use the usual FFT wraparound order: index ``i`` along an
axis with ``M`` points is the frequency ``k/P`` where ``k = i`` for
``i < M/2`` and ``k = i - M`` otherwise.  Interfaces take and return
physical frequency values (see ``Geometry.frequencies``), never raw indices.

The frequency measure carries weight ``1/P`` per direction, so Plancherel
reads ``sum |f|^2 dz = sum |F|^2 prod(1/P)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import BandLimitError, PreconditionError, StructuralError

PHYSICAL = "physical"
FREQUENCY = "frequency"


def _is_pow2(x):
    return x >= 1 and (x & (x - 1)) == 0


def next_pow2(x):
    """Smallest power of two >= x (and >= 1)."""
    x = int(max(1, np.ceil(x)))
    return 1 << (x - 1).bit_length()


@dataclass(frozen=True)
class Geometry:
    """Discretized waveguide R^m x T^n_lam.

    ``grid_points`` lists the sample count for each direction, real
    directions first.  Geometries are cheap metadata; nothing is allocated
    until a field is built on them.
    """

    m: int
    n: int
    lam: float
    box_length: float
    grid_points: tuple

    def __post_init__(self):
        gp = tuple(int(g) for g in np.atleast_1d(self.grid_points))
        object.__setattr__(self, "grid_points", gp)
        if self.m < 0 or self.n < 0 or self.m + self.n < 1:
            raise PreconditionError("need m >= 0, n >= 0 and m + n >= 1")
        if not self.lam > 0:
            raise PreconditionError("torus scale lam must be positive")
        if not self.box_length > 0:
            raise PreconditionError("box_length must be positive")
        if len(gp) != self.m + self.n:
            raise StructuralError(
                f"grid_points has {len(gp)} entries, expected {self.m + self.n}")
        for g in gp:
            if g < 4 or not _is_pow2(g):
                raise PreconditionError(
                    f"grid_points entries must be powers of two >= 4, got {g}")

    @classmethod
    def for_band(cls, m, n, lam, box_length, band_edge, samples_per_wavelength=8):
        """Smallest power-of-two grid with the requested sampling of ``band_edge``.

        ``band_edge`` may be a scalar or one value per direction.
        """
        d = m + n
        edges = np.broadcast_to(np.asarray(band_edge, dtype=float), (d,))
        circ = [box_length] * m + [lam] * n
        gp = tuple(max(4, next_pow2(samples_per_wavelength * e * P))
                   for e, P in zip(edges, circ))
        return cls(m, n, lam, box_length, gp)

    @property
    def d(self):
        return self.m + self.n

    @property
    def shape(self):
        return self.grid_points

    @property
    def circumferences(self):
        return (float(self.box_length),) * self.m + (float(self.lam),) * self.n

    @property
    def spacing(self):
        return tuple(P / M for P, M in zip(self.circumferences, self.grid_points))

    @property
    def frequency_spacing(self):
        return tuple(1.0 / P for P in self.circumferences)

    @property
    def nyquist(self):
        return tuple(M / (2.0 * P) for P, M in zip(self.circumferences, self.grid_points))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    @property
    def frequency_weight(self):
        """Weight of one lattice site under (d xi)_lam."""
        return float(np.prod(self.frequency_spacing))

    @property
    def volume(self):
        return float(np.prod(self.circumferences))

    def is_periodic(self, axis):
        return axis >= self.m

    def axis_name(self, axis):
        kind = "periodic" if self.is_periodic(axis) else "real"
        return f"direction {axis} ({kind})"

    def coordinates(self, axis):
        P, M = self.circumferences[axis], self.grid_points[axis]
        return -P / 2 + np.arange(M) * (P / M)

    def frequencies(self, axis):
        P, M = self.circumferences[axis], self.grid_points[axis]
        return sfft.fftfreq(M, d=P / M)

    def axis_frequencies(self):
        return [self.frequencies(a) for a in range(self.d)]

    def axis_coordinates(self):
        return [self.coordinates(a) for a in range(self.d)]

    def xi_squared(self):
        """|xi|^2 on the full frequency grid."""
        return _tensor_sum([f ** 2 for f in self.axis_frequencies()])

    def check_band(self, edge, what="field"):
        """Raise ``BandLimitError`` unless the Nyquist frequency exceeds ``edge``."""
        edges = np.broadcast_to(np.asarray(edge, dtype=float), (self.d,))
        for a, (e, ny) in enumerate(zip(edges, self.nyquist)):
            if not ny > e:
                raise BandLimitError(
                    f"{what}: band edge {e:g} not below Nyquist {ny:g} along "
                    f"{self.axis_name(a)}", axis=a)

    def with_grid(self, grid_points):
        return Geometry(self.m, self.n, self.lam, self.box_length, tuple(grid_points))

    @cached_property
    def _signs(self):
        # (-1)^k for every axis; M is even so (-1)^k == (-1)^index
        return [np.where(np.arange(M) % 2 == 0, 1.0, -1.0) for M in self.grid_points]

    def sign_array(self):
        return _tensor_product(self._signs)


def _expand(arrays):
    d = len(arrays)
    out = []
    for a, arr in enumerate(arrays):
        shape = [1] * d
        shape[a] = arr.shape[0]
        out.append(np.asarray(arr).reshape(shape))
    return out


def _tensor_product(arrays):
    out = None
    for arr in _expand(arrays):
        out = arr if out is None else out * arr
    return out


def _tensor_sum(arrays):
    out = None
    for arr in _expand(arrays):
        out = arr if out is None else out + arr
    return out


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Immutable complex samples on a geometry.

    ``domain`` is ``"physical"`` (values at grid points) or ``"frequency"``
    (values of f_hat on the lattice, wraparound order).
    """

    geometry: Geometry
    domain: str
    values: np.ndarray

    def __post_init__(self):
        if self.domain not in (PHYSICAL, FREQUENCY):
            raise StructuralError(f"unknown domain tag {self.domain!r}")
        arr = np.asarray(self.values)
        shape = self.geometry.grid_points
        if arr.size != int(np.prod(shape)):
            raise StructuralError(
                f"values hold {arr.size} entries, geometry needs {int(np.prod(shape))}")
        arr = np.array(arr, dtype=np.complex128, copy=True).reshape(shape)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @classmethod
    def _adopt(cls, geometry, domain, values):
        # internal constructor for freshly computed arrays (no defensive copy)
        values = np.ascontiguousarray(values, dtype=np.complex128).reshape(geometry.grid_points)
        values.setflags(write=False)
        obj = object.__new__(cls)
        object.__setattr__(obj, "geometry", geometry)
        object.__setattr__(obj, "domain", domain)
        object.__setattr__(obj, "values", values)
        return obj

    @classmethod
    def zeros(cls, geometry, domain=PHYSICAL):
        return cls._adopt(geometry, domain, np.zeros(geometry.grid_points, complex))

    @classmethod
    def from_function(cls, geometry, func):
        """Sample ``func(*coords)`` on the physical grid (coords broadcast)."""
        coords = _expand(geometry.axis_coordinates())
        vals = np.broadcast_to(func(*coords), geometry.grid_points)
        return cls._adopt(geometry, PHYSICAL, np.array(vals, dtype=complex))

    @classmethod
    def from_spectrum(cls, geometry, func):
        """Evaluate ``func(*xi)`` on the frequency lattice."""
        freqs = _expand(geometry.axis_frequencies())
        vals = np.broadcast_to(func(*freqs), geometry.grid_points)
        return cls._adopt(geometry, FREQUENCY, np.array(vals, dtype=complex))

    def to_frequency(self):
        return self if self.domain == FREQUENCY else forward_transform(self)

    def to_physical(self):
        return self if self.domain == PHYSICAL else inverse_transform(self)

    def norm(self):
        return l2_norm(self)

    def scaled(self, a):
        return SpectralField._adopt(self.geometry, self.domain, self.values * a)

    def __add__(self, other):
        _same_geometry(self, other)
        b = other if other.domain == self.domain else _convert(other, self.domain)
        return SpectralField._adopt(self.geometry, self.domain, self.values + b.values)

    def __sub__(self, other):
        return self + other.scaled(-1.0)


def _convert(f, domain):
    return f.to_frequency() if domain == FREQUENCY else f.to_physical()


def _same_geometry(f, g):
    if f.geometry != g.geometry:
        raise StructuralError("fields live on different geometries")


def forward_transform(f):
    """Physical samples -> lattice values of f_hat (2 pi convention)."""
    if f.domain != PHYSICAL:
        raise PreconditionError("forward_transform expects a physical-domain field")
    geo = f.geometry
    F = sfft.fftn(f.values)
    F *= geo.sign_array() * geo.cell_volume
    return SpectralField._adopt(geo, FREQUENCY, F)


def inverse_transform(F):
    """Lattice values of f_hat -> physical samples."""
    if F.domain != FREQUENCY:
        raise PreconditionError("inverse_transform expects a frequency-domain field")
    geo = F.geometry
    f = sfft.ifftn(F.values * geo.sign_array())
    f /= geo.cell_volume
    return SpectralField._adopt(geo, PHYSICAL, f)


def frequency_convolve(F, G):
    """(F * G)(xi) = sum_eta F(eta) G(xi - eta) weighted by (d eta)_lam.

    The lattice is treated circularly, which makes the result identical to
    transforming the pointwise product of the two physical fields.
    """
    if F.domain != FREQUENCY or G.domain != FREQUENCY:
        raise PreconditionError("frequency_convolve expects frequency-domain fields")
    _same_geometry(F, G)
    geo = F.geometry
    H = sfft.ifftn(sfft.fftn(F.values) * sfft.fftn(G.values))
    H *= geo.frequency_weight
    return SpectralField._adopt(geo, FREQUENCY, H)


def l2_norm(f):
    """L^2 norm in the field's own domain (Plancherel makes them agree)."""
    w = f.geometry.cell_volume if f.domain == PHYSICAL else f.geometry.frequency_weight
    return float(np.sqrt(np.vdot(f.values, f.values).real * w))


def inner(f, g):
    """<f, g> = int f conj(g); both fields are brought to frequency space."""
    _same_geometry(f, g)
    F, G = f.to_frequency(), g.to_frequency()
    return complex(np.vdot(G.values, F.values) * f.geometry.frequency_weight)


def random_band_limited(geometry, band_edge, rng, domain=PHYSICAL):
    """Gaussian random spectrum supported on |xi_i| <= band_edge per direction."""
    geometry.check_band(band_edge, "random field")
    freqs = geometry.axis_frequencies()
    mask = _tensor_product([(np.abs(f) <= band_edge).astype(float) for f in freqs])
    shape = geometry.grid_points
    F = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * mask
    field = SpectralField._adopt(geometry, FREQUENCY, F)
    return field if domain == FREQUENCY else inverse_transform(field)


@dataclass(frozen=True, eq=False)
class SpectralPatch:
    """A rectangular window of the frequency lattice.

    Holds f_hat on lattice sites ``(origin[a] + j) / P_a`` for
    ``0 <= j < values.shape[a]``; every other site is zero.  Patches let
    localized spectra live on geometries whose full grid would not fit in
    memory.  ``to_field`` densifies when the geometry is small enough.
    """

    geometry: Geometry
    origin: tuple
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=np.complex128, copy=True)
        origin = tuple(int(o) for o in self.origin)
        if arr.ndim != self.geometry.d or len(origin) != self.geometry.d:
            raise StructuralError("patch rank does not match the geometry")
        for a, (o, w, M) in enumerate(zip(origin, arr.shape, self.geometry.grid_points)):
            if o <= -M // 2 or o + w - 1 >= M // 2:
                raise BandLimitError(
                    f"patch reaches the Nyquist frequency along {self.geometry.axis_name(a)}",
                    axis=a)
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def _adopt(cls, geometry, origin, values):
        obj = object.__new__(cls)
        values = np.ascontiguousarray(values, dtype=np.complex128)
        values.setflags(write=False)
        object.__setattr__(obj, "geometry", geometry)
        object.__setattr__(obj, "origin", tuple(int(o) for o in origin))
        object.__setattr__(obj, "values", values)
        return obj

    @property
    def shape(self):
        return self.values.shape

    def frequencies(self, axis):
        P = self.geometry.circumferences[axis]
        return (self.origin[axis] + np.arange(self.values.shape[axis])) / P

    def axis_frequencies(self):
        return [self.frequencies(a) for a in range(self.geometry.d)]

    def norm(self):
        return float(np.sqrt(np.vdot(self.values, self.values).real
                             * self.geometry.frequency_weight))

    def max_abs_frequency(self, rel_tol=0.0):
        """Per-direction max |xi| over sites with |value| > rel_tol * max."""
        amp = np.abs(self.values)
        top = amp.max() if amp.size else 0.0
        if top == 0:
            return np.zeros(self.geometry.d)
        keep = amp > rel_tol * top
        out = []
        for a in range(self.geometry.d):
            other = tuple(b for b in range(self.geometry.d) if b != a)
            occ = np.any(keep, axis=other) if other else keep
            out.append(np.abs(self.frequencies(a)[occ]).max())
        return np.array(out)

    def scaled(self, a):
        return SpectralPatch._adopt(self.geometry, self.origin, self.values * a)

    def with_values(self, values):
        return SpectralPatch._adopt(self.geometry, self.origin, values)

    def trimmed(self, tol=0.0):
        """Drop boundary rows whose values are all <= tol * max|value|."""
        amp = np.abs(self.values)
        top = amp.max() if amp.size else 0.0
        if top == 0:
            return self
        keep = amp > tol * top
        sl, origin = [], []
        for a in range(self.geometry.d):
            other = tuple(b for b in range(self.geometry.d) if b != a)
            occ = np.flatnonzero(np.any(keep, axis=other) if other else keep)
            sl.append(slice(occ[0], occ[-1] + 1))
            origin.append(self.origin[a] + occ[0])
        return SpectralPatch._adopt(self.geometry, origin, self.values[tuple(sl)])

    def to_field(self):
        geo = self.geometry
        F = np.zeros(geo.grid_points, dtype=complex)
        index = tuple((o + np.arange(w)) % M for o, w, M in
                      zip(self.origin, self.values.shape, geo.grid_points))
        F[np.ix_(*index)] = self.values
        return SpectralField._adopt(geo, FREQUENCY, F)

    @classmethod
    def from_field(cls, field, tol=1e-14):
        """Crop a field to the smallest circular box holding its support.

        Sites with ``|f_hat| <= tol * max|f_hat|`` count as empty; the default
        absorbs round-off left by a physical -> frequency transform.
        """
        F = field.to_frequency()
        geo = F.geometry
        amp = np.abs(F.values)
        thresh = tol * amp.max() if amp.size and amp.max() > 0 else 0.0
        keep = amp > thresh
        if not keep.any():
            return cls._adopt(geo, (0,) * geo.d, np.zeros((1,) * geo.d, complex))
        starts, widths = [], []
        for a, M in enumerate(geo.grid_points):
            other = tuple(b for b in range(geo.d) if b != a)
            occ = np.flatnonzero(np.any(keep, axis=other) if other else keep)
            start, width = _circular_span(occ, M)
            k0 = start if start < M // 2 else start - M
            if k0 + width - 1 >= M // 2 or k0 <= -M // 2:
                raise BandLimitError(
                    f"content at the Nyquist frequency along {geo.axis_name(a)}", axis=a)
            starts.append(k0)
            widths.append(width)
        index = tuple((k0 + np.arange(w)) % M for k0, w, M in
                      zip(starts, widths, geo.grid_points))
        return cls._adopt(geo, tuple(starts), F.values[np.ix_(*index)])


def _circular_span(occ, M):
    """Start index and width of the shortest arc covering sorted indices ``occ``."""
    if len(occ) == M:
        return M // 2, M   # full circle, start at -M/2
    gaps = np.diff(np.concatenate([occ, [occ[0] + M]]))
    i = int(np.argmax(gaps))
    start = int(occ[(i + 1) % len(occ)])
    end = int(occ[i])
    width = (end - start) % M + 1
    return start, width


def as_patch(f, tol=1e-14):
    """Coerce a field or patch into a patch."""
    return f if isinstance(f, SpectralPatch) else SpectralPatch.from_field(f, tol)


def axis_frequencies(f):
    """Per-axis lattice frequencies of a frequency-domain field or a patch."""
    if isinstance(f, SpectralPatch):
        return f.axis_frequencies()
    return f.geometry.axis_frequencies()


def apply_multiplier(f, factors=None, full=None):
    """Multiply f_hat by a tensor of per-axis ``factors`` and/or a ``full`` array builder.

    ``factors`` is a list of callables (one per axis) mapping 1-D frequency
    arrays to multiplier values; ``full`` is a callable taking the per-axis
    frequency list and returning a broadcastable array.  The result keeps
    the input's domain (physical fields go through a round trip).
    """
    if isinstance(f, SpectralPatch):
        freqs = f.axis_frequencies()
        mult = _build(freqs, factors, full)
        return f.with_values(f.values * mult)
    F = f.to_frequency()
    mult = _build(F.geometry.axis_frequencies(), factors, full)
    out = SpectralField._adopt(F.geometry, FREQUENCY, F.values * mult)
    return out if f.domain == FREQUENCY else inverse_transform(out)


def _build(freqs, factors, full):
    mult = 1.0
    if factors is not None:
        mult = _tensor_product([fac(x) for fac, x in zip(factors, freqs)])
    if full is not None:
        mult = mult * full([x for x in _expand(freqs)])
    return mult


def tensor_product(arrays):
    return _tensor_product(arrays)


def tensor_sum(arrays):
    return _tensor_sum(arrays)


def expand_axes(arrays):
    return _expand(arrays)
