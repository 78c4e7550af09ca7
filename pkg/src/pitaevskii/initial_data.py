"""Admissible initial triplets (psi0, u0, rho0)."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .diagnostics import energy
from .errors import ValidationError
from .galerkin import SimState, truncate_state
from .spectral import SpectralScalarField, VelocityField, fft, ifft, leray_coeffs


class Kind(str, enum.Enum):
    PLANE_WAVE = "plane_wave"
    TAYLOR_GREEN = "taylor_green"
    SHEAR_MODE = "shear_mode"
    RANDOM_SMOOTH = "random_smooth"
    COMPOSITE = "composite"


class DensityProfile(str, enum.Enum):
    CONSTANT = "constant"
    SINE_PERTURBED = "sine_perturbed"
    MOLLIFIED = "mollified"


@dataclass(frozen=True)
class InitialDataSpec:
    """Recipe for the initial data.

    The wavefunction is a sum of plane waves ``A_j exp(i k_j.x)`` except for
    RANDOM_SMOOTH, where ``psi_amplitudes[0]`` sets its maximum modulus. The
    velocity is zero for PLANE_WAVE, a Taylor-Green vortex for TAYLOR_GREEN and
    COMPOSITE, ``(U sin(n y), 0, ...)`` for SHEAR_MODE and a random solenoidal
    field for RANDOM_SMOOTH. ``mollifier_width`` is a fraction of the domain
    length; when None the reciprocal of the Galerkin cutoff is used.
    """

    kind: Kind = Kind.PLANE_WAVE
    psi_amplitudes: tuple = (1.0,)
    psi_wavevectors: tuple = ((1,),)
    velocity_amplitude: float = 0.0
    velocity_wavenumber: int = 1
    decay: float = 6.0
    density: DensityProfile = DensityProfile.CONSTANT
    density_mean: float = 1.0
    density_amplitude: float = 0.1
    mollifier_width: float = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "density", DensityProfile(self.density))
        object.__setattr__(self, "psi_amplitudes", tuple(float(a) for a in self.psi_amplitudes))
        object.__setattr__(
            self, "psi_wavevectors", tuple(tuple(int(n) for n in k) for k in self.psi_wavevectors)
        )
        if self.decay <= 4:
            raise ValidationError(f"random spectral decay exponent must exceed 4, got {self.decay}")
        if self.kind is not Kind.RANDOM_SMOOTH and len(self.psi_amplitudes) != len(self.psi_wavevectors):
            raise ValidationError("psi_amplitudes and psi_wavevectors must have the same length")


def _plane_waves(spec, grid, cutoff):
    psi = np.zeros(grid.shape, dtype=complex)
    for amp, k in zip(spec.psi_amplitudes, spec.psi_wavevectors):
        k = tuple(k) + (0,) * (grid.dim - len(k))
        if len(k) != grid.dim:
            raise ValidationError(f"wavevector {k} does not match grid dimension {grid.dim}")
        if max(abs(n) for n in k) > cutoff:
            raise ValidationError(f"wavevector {k} lies outside the Galerkin cutoff {cutoff}")
        idx = tuple(n % N for n, N in zip(k, grid.shape))
        psi[idx] += amp
    return psi


def _need_2d(grid, kind):
    if grid.dim < 2:
        raise ValidationError(f"{kind.value} velocity needs at least two dimensions")


def _taylor_green(grid, amp, n):
    x = grid.coordinates
    u = np.zeros((grid.dim, *grid.shape))
    u[0] = amp * np.sin(n * x[0]) * np.cos(n * x[1])
    u[1] = -amp * np.cos(n * x[0]) * np.sin(n * x[1])
    return fft(u, grid)


def _shear(grid, amp, n):
    u = np.zeros((grid.dim, *grid.shape))
    u[0] = amp * np.sin(n * grid.coordinates[1])
    return fft(u, grid)


def _random_fields(spec, grid, trunc):
    rng = np.random.Generator(np.random.Philox(spec.seed))
    envelope = (1.0 + grid.k2) ** (-0.5 * spec.decay) * trunc.mask

    def draw():
        return (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * envelope

    psi_hat = draw()
    amp = spec.psi_amplitudes[0] if spec.psi_amplitudes else 1.0
    peak = np.abs(ifft(psi_hat, grid)).max()
    psi_hat *= amp / peak if peak > 0 else 0.0

    u_hat = np.zeros((grid.dim, *grid.shape), dtype=complex)
    if grid.dim > 1 and spec.velocity_amplitude != 0:
        raw = np.stack([fft(ifft(draw(), grid).real, grid) for _ in range(grid.dim)])
        u_hat = leray_coeffs(raw, grid) * trunc.mask
        peak = np.abs(ifft(u_hat, grid)).max()
        u_hat *= spec.velocity_amplitude / peak if peak > 0 else 0.0
    return psi_hat, u_hat


def mollifier(grid, width):
    """Compactly supported exponential bump of radius ``width * L_j``, unit discrete mass."""
    r2 = np.zeros(grid.shape)
    for x, L in zip(grid.coordinates, grid.lengths):
        dist = np.minimum(x, L - x)
        r2 = r2 + (dist / (width * L)) ** 2
    bump = np.zeros(grid.shape)
    inside = r2 < 1.0
    bump[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return bump / bump.sum()


def mollify(values, grid, width):
    """Periodic convolution with the unit-mass bump."""
    kernel_hat = fft(mollifier(grid, width), grid) * grid.size
    return ifft(fft(values, grid) * kernel_hat, grid).real


def step_profile(grid, low, high):
    """``high`` on the first half of axis 0, ``low`` elsewhere."""
    return np.where(grid.coordinates[0] < 0.5 * grid.lengths[0], high, low)


def _density(spec, grid, trunc, params):
    if spec.density is DensityProfile.CONSTANT:
        rho = np.full(grid.shape, spec.density_mean)
    elif spec.density is DensityProfile.SINE_PERTURBED:
        rho = spec.density_mean + spec.density_amplitude * np.sin(grid.coordinates[0])
    else:
        width = spec.mollifier_width if spec.mollifier_width is not None else 1.0 / trunc.cutoff
        rough = step_profile(grid, params.density_min, params.density_max)
        rho = np.clip(mollify(rough, grid, width), params.density_min, params.density_max)
    lo, hi = rho.min(), rho.max()
    tol = 1e-12 * max(1.0, params.density_max)
    if lo < params.density_min - tol or hi > params.density_max + tol:
        raise ValidationError(
            f"initial density range [{lo:.6g}, {hi:.6g}] violates bounds m={params.density_min}, M={params.density_max}"
        )
    return fft(rho, grid)


def build_initial_state(spec, grid, trunc, params):
    """Assemble and truncate the initial triplet; ``energy0`` is set from it."""
    cutoff = trunc.cutoff
    if spec.kind is Kind.RANDOM_SMOOTH:
        psi_hat, u_hat = _random_fields(spec, grid, trunc)
    else:
        psi_hat = _plane_waves(spec, grid, cutoff)
        u_hat = np.zeros((grid.dim, *grid.shape), dtype=complex)
        n = spec.velocity_wavenumber
        if spec.kind is Kind.TAYLOR_GREEN or (spec.kind is Kind.COMPOSITE and spec.velocity_amplitude != 0):
            _need_2d(grid, spec.kind)
            u_hat = _taylor_green(grid, spec.velocity_amplitude, n)
        elif spec.kind is Kind.SHEAR_MODE:
            _need_2d(grid, spec.kind)
            u_hat = _shear(grid, spec.velocity_amplitude, n)
        if np.any(u_hat) and n > cutoff:
            raise ValidationError(f"velocity wavenumber {n} lies outside the Galerkin cutoff {cutoff}")

    state = SimState(
        psi=SpectralScalarField(grid, psi_hat),
        u=VelocityField(grid, u_hat),
        rho=SpectralScalarField(grid, _density(spec, grid, trunc, params), True),
    )
    state = truncate_state(state, trunc)
    if state.u.divergence_defect() > 1e-12:
        raise ValidationError("initial velocity is not divergence-free")
    return state.replace(energy0=sum(energy(state, params)))
