"""Periodic spectral infrastructure.

Fields are stored as Fourier coefficients in numpy FFT order with the forward
transform normalised by the number of grid points, so a coefficient is the
amplitude of its mode: ``f(x) = sum_k fhat[k] exp(i k.x)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import DimensionError, ParameterError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[0, L_1) x ... x [0, L_d)``."""

    shape: tuple
    lengths: tuple = None

    def __post_init__(self):
        shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        if not 1 <= len(shape) <= 3:
            raise DimensionError(f"grid dimension must be 1, 2 or 3, got {len(shape)}")
        if any(n <= 0 or n % 2 for n in shape):
            raise DimensionError(f"resolution must be even and positive per axis, got {shape}")
        lengths = self.lengths
        if lengths is None:
            lengths = (TWO_PI,) * len(shape)
        lengths = tuple(float(L) for L in np.broadcast_to(np.atleast_1d(lengths), (len(shape),)))
        if any(L <= 0 for L in lengths):
            raise DimensionError(f"domain lengths must be positive, got {lengths}")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def uniform(cls, dim, n, length=TWO_PI):
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self):
        return len(self.shape)

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    @property
    def cell_volume(self):
        return self.volume / self.size

    @cached_property
    def mode_index(self):
        """Integer mode numbers per axis, FFT order, Nyquist stored as +N/2."""
        out = []
        for n in self.shape:
            idx = np.fft.fftfreq(n, 1.0 / n).astype(np.int64)
            idx[n // 2] = n // 2
            out.append(idx)
        return tuple(out)

    @cached_property
    def wavenumbers(self):
        """Per-axis 1D wavenumber arrays ``2 pi n / L``."""
        return tuple(TWO_PI * n / L for n, L in zip(self.mode_index, self.lengths))

    def _broadcast(self, arrays):
        out = []
        for j, a in enumerate(arrays):
            shape = [1] * self.dim
            shape[j] = a.size
            out.append(a.reshape(shape))
        return tuple(out)

    @cached_property
    def k(self):
        return self._broadcast(self.wavenumbers)

    @cached_property
    def k2(self):
        return sum(kj**2 for kj in self.k)

    @cached_property
    def dk(self):
        """Derivative wavenumbers: as ``k`` but zero on the Nyquist plane of each axis."""
        out = []
        for n, kj in zip(self.shape, self.wavenumbers):
            kd = kj.copy()
            kd[n // 2] = 0.0
            out.append(kd)
        return self._broadcast(out)

    @cached_property
    def dk2(self):
        return sum(kj**2 for kj in self.dk)

    @cached_property
    def dealias_mask(self):
        """Two-thirds rule: keep modes with ``|n_j| < N_j / 3`` on every axis."""
        mask = np.ones(self.shape, dtype=bool)
        for j, (n, idx) in enumerate(zip(self.shape, self.mode_index)):
            shape = [1] * self.dim
            shape[j] = n
            mask = mask & (3 * np.abs(idx) < n).reshape(shape)
        return mask

    @cached_property
    def dealias_cutoff(self):
        """Largest ``|n|`` kept by the two-thirds rule on the coarsest axis."""
        return min((n - 1) // 3 for n in self.shape)

    def band_mask(self, cutoff):
        """Modes with ``|n_j| <= cutoff`` on every axis."""
        mask = np.ones(self.shape, dtype=bool)
        for j, idx in enumerate(self.mode_index):
            shape = [1] * self.dim
            shape[j] = idx.size
            mask = mask & (np.abs(idx) <= cutoff).reshape(shape)
        return mask

    @cached_property
    def coordinates(self):
        axes = [np.arange(n) * L / n for n, L in zip(self.shape, self.lengths)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    @cached_property
    def points(self):
        """Grid points as an ``(size, dim)`` array in C order."""
        return np.stack([c.ravel() for c in self.coordinates], axis=-1)


def _axes(grid):
    return tuple(range(-grid.dim, 0))


def fft(values, grid):
    return sfft.fftn(values, axes=_axes(grid), norm="forward")


def ifft(coeffs, grid):
    return sfft.ifftn(coeffs, axes=_axes(grid), norm="forward")


@dataclass(frozen=True, eq=False)
class SpectralScalarField:
    """Scalar field held as Fourier coefficients.

    ``real`` marks fields whose physical values are real; their coefficients
    are Hermitian symmetric.
    """

    grid: Grid
    coeffs: np.ndarray
    real: bool = False

    def __post_init__(self):
        if self.coeffs.shape != self.grid.shape:
            raise DimensionError(f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}")

    def physical(self):
        return to_physical(self)

    def _like(self, coeffs, real=None):
        return SpectralScalarField(self.grid, coeffs, self.real if real is None else real)

    def _check(self, other):
        if other.grid != self.grid:
            raise DimensionError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return self._like(self.coeffs + other.coeffs, self.real and other.real)

    def __sub__(self, other):
        self._check(other)
        return self._like(self.coeffs - other.coeffs, self.real and other.real)

    def __neg__(self):
        return self._like(-self.coeffs)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        return self._like(self.coeffs * scalar, self.real and scalar.imag == 0)

    __rmul__ = __mul__

    def hermitian_defect(self):
        """Max of ``|c(-k) - conj(c(k))|`` relative to max ``|c|``."""
        c = self.coeffs
        flipped = np.roll(np.flip(c, axis=_axes(self.grid)), 1, axis=_axes(self.grid))
        scale = np.max(np.abs(c)) or 1.0
        return float(np.max(np.abs(flipped - np.conj(c))) / scale)


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Real vector field; ``coeffs`` has shape ``(dim, *grid.shape)``."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.grid.dim, *self.grid.shape):
            raise DimensionError(f"velocity coefficients have shape {self.coeffs.shape}")

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.dim, *grid.shape), dtype=complex))

    @property
    def components(self):
        return tuple(SpectralScalarField(self.grid, c, True) for c in self.coeffs)

    def physical(self):
        return ifft(self.coeffs, self.grid).real

    def divergence_defect(self):
        """Max over modes of ``|k.u(k)|`` relative to max ``|u|``."""
        div = sum(kj * c for kj, c in zip(self.grid.dk, self.coeffs))
        scale = np.max(np.abs(self.coeffs)) or 1.0
        return float(np.max(np.abs(div)) / scale)


def to_spectral(values, grid, real=None):
    values = np.asarray(values)
    if values.shape != grid.shape:
        raise DimensionError(f"array shape {values.shape} does not match grid {grid.shape}")
    if real is None:
        real = not np.iscomplexobj(values)
    return SpectralScalarField(grid, fft(values, grid), bool(real))


def to_physical(field):
    values = ifft(field.coeffs, field.grid)
    return values.real if field.real else values


def vector_to_spectral(values, grid):
    """Real ``(dim, *shape)`` array to a VelocityField (no projection applied)."""
    values = np.asarray(values, dtype=float)
    return VelocityField(grid, fft(values, grid))


def _as_vector_coeffs(v):
    if isinstance(v, VelocityField):
        return v.grid, v.coeffs
    v = tuple(v)
    grid = v[0].grid
    for c in v:
        if c.grid != grid:
            raise DimensionError("vector components live on different grids")
    if len(v) != grid.dim:
        raise DimensionError(f"expected {grid.dim} components, got {len(v)}")
    return grid, np.stack([c.coeffs for c in v])


def gradient(f):
    g = f.grid
    return tuple(SpectralScalarField(g, 1j * kj * f.coeffs, f.real) for kj in g.dk)


def divergence(v):
    grid, coeffs = _as_vector_coeffs(v)
    return SpectralScalarField(grid, sum(1j * kj * c for kj, c in zip(grid.dk, coeffs)), True)


def laplacian(f):
    return SpectralScalarField(f.grid, -f.grid.dk2 * f.coeffs, f.real)


def fractional_laplacian(f, s):
    """``(-Delta)^s`` as the multiplier ``|k|^{2s}``; the mean mode maps to zero."""
    if s < 0:
        raise ParameterError(f"fractional power must be nonnegative, got s={s}")
    k2 = f.grid.k2
    mult = np.zeros_like(k2)
    nz = k2 > 0
    mult[nz] = k2[nz] ** s
    return SpectralScalarField(f.grid, mult * f.coeffs, f.real)


def leray_coeffs(coeffs, grid):
    """Per-mode ``v - k (k.v) / |k|^2`` on a ``(dim, *shape)`` coefficient array."""
    k = grid.dk
    k2 = grid.dk2
    kv = sum(kj * c for kj, c in zip(k, coeffs))
    inv = np.zeros_like(k2)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    return np.stack([c - kj * kv * inv for kj, c in zip(k, coeffs)])


def leray_project(v):
    grid, coeffs = _as_vector_coeffs(v)
    return VelocityField(grid, leray_coeffs(coeffs, grid))


def dealias(f):
    return SpectralScalarField(f.grid, f.coeffs * f.grid.dealias_mask, f.real)


def inner(f, g):
    """``int conj(f) g dx`` evaluated exactly by Parseval."""
    if f.grid != g.grid:
        raise DimensionError("fields live on different grids")
    return complex(f.grid.volume * np.vdot(f.coeffs, g.coeffs))


def sobolev_norm(f, s=0.0):
    if s < 0:
        raise ParameterError(f"Sobolev index must be nonnegative, got s={s}")
    weight = (1.0 + f.grid.k2) ** s
    return float(np.sqrt(f.grid.volume * np.sum(weight * np.abs(f.coeffs) ** 2)))


def lp_norm(f, p=2):
    values = np.abs(to_physical(f))
    if p == 2:
        return float(np.sqrt(f.grid.cell_volume * np.sum(values**2)))
    if p == 4:
        return float((f.grid.cell_volume * np.sum(values**4)) ** 0.25)
    if p in (np.inf, "inf"):
        return float(values.max())
    raise ParameterError(f"unsupported Lebesgue exponent p={p}; use 2, 4 or inf")


def _interp_factors(grid, coeffs, points):
    """Per-axis exponentials and the matching coefficient block.

    Only modes carrying nonzero coefficients are kept; a nonzero Nyquist plane
    is split evenly between +N/2 and -N/2 so real fields interpolate to reals.
    """
    lead = coeffs.shape[: coeffs.ndim - grid.dim]
    block = coeffs
    factors = []
    for j in range(grid.dim):
        axis = len(lead) + j
        other = tuple(a for a in range(block.ndim) if a != axis)
        active = np.flatnonzero(np.any(block != 0, axis=other))
        n = grid.shape[j]
        idx = grid.mode_index[j]
        block = np.take(block, active, axis=axis)
        modes = idx[active].astype(float)
        nyq = np.flatnonzero(active == n // 2)
        if nyq.size:
            half = 0.5 * np.take(block, nyq, axis=axis)
            block = np.concatenate([block, half], axis=axis)
            sl = [slice(None)] * block.ndim
            sl[axis] = nyq
            block[tuple(sl)] *= 0.5
            modes = np.concatenate([modes, [-(n // 2)]])
        k = TWO_PI * modes / grid.lengths[j]
        factors.append(np.exp(1j * np.outer(points[:, j], k)))
    return lead, block, factors


def evaluate_coeffs(coeffs, grid, points):
    """Evaluate trigonometric interpolants at arbitrary points.

    ``coeffs`` is ``(*lead, *grid.shape)``; returns ``(*lead, npoints)`` complex.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != grid.dim:
        raise DimensionError(f"points must have {grid.dim} columns")
    lead, block, factors = _interp_factors(grid, coeffs, points)
    npts = points.shape[0]
    nlead = int(np.prod(lead)) if lead else 1
    block = block.reshape(nlead, *block.shape[len(lead):])
    # contract the last axis first, keeping the point index
    out = np.einsum("l...b,pb->lp...", block, factors[-1])
    for j in range(grid.dim - 2, -1, -1):
        out = np.einsum("lp...a,pa->lp...", out, factors[j])
    return out.reshape(*lead, npts)


def evaluate(f, points):
    """Trigonometric interpolant of a scalar field at off-grid points (exact for band-limited fields)."""
    values = evaluate_coeffs(f.coeffs, f.grid, points)
    return values.real if f.real else values
