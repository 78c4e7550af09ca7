"""The coupling operator B and the source terms it generates.

All pointwise products are formed on the grid and truncated with the
two-thirds mask before they are returned, so every identity checked against
these kernels is an identity between grid sums.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, ParameterError
from .spectral import SpectralScalarField, VelocityField, fft, ifft


@dataclass(frozen=True)
class ModelParams:
    """Physical constants.

    coupling is Lambda, interaction is mu, viscosity is nu; density_min and
    density_max bound the initial density and density_floor is epsilon.
    """

    coupling: float = 1.0
    interaction: float = 1.0
    viscosity: float = 0.1
    density_min: float = 0.5
    density_max: float = 2.0
    density_floor: float = 0.25

    def __post_init__(self):
        if self.coupling < 0:
            raise ParameterError(f"coupling strength must be nonnegative, got {self.coupling}")
        if self.interaction <= 0:
            raise ParameterError(f"interaction must be positive, got {self.interaction}")
        if self.viscosity <= 0:
            raise ParameterError(f"viscosity must be positive, got {self.viscosity}")
        if not 0 < self.density_floor < self.density_min <= self.density_max:
            raise ParameterError(
                "density floor must satisfy 0 < epsilon < m <= M, got "
                f"epsilon={self.density_floor}, m={self.density_min}, M={self.density_max}"
            )

    def with_(self, **changes):
        return replace(self, **changes)

    @property
    def density_upper(self):
        """Upper density bound ``M + m - epsilon`` valid up to the existence time."""
        return self.density_max + self.density_min - self.density_floor


def _check_pair(psi, u):
    if psi.grid != u.grid:
        raise DimensionError("wavefunction and velocity live on different grids")


class CouplingTerms:
    """Physical-space ingredients of B shared by every right-hand side.

    Built once per stage; holds psi, grad psi and u on the grid.
    """

    def __init__(self, grid, psi_hat, u_hat):
        self.grid = grid
        self.psi_hat = psi_hat
        self.u_hat = u_hat
        self.psi = ifft(psi_hat, grid)
        self.grad_psi = ifft(np.stack([1j * kj * psi_hat for kj in grid.dk]), grid)
        self.u = ifft(u_hat, grid).real
        self.u2 = np.sum(self.u**2, axis=0)
        self.rho_s = np.abs(self.psi) ** 2

    def linear_products(self):
        """``i u.grad psi + |u|^2 psi / 2`` on the grid."""
        return 1j * np.sum(self.u * self.grad_psi, axis=0) + 0.5 * self.u2 * self.psi

    def cubic(self, mu):
        return mu * self.rho_s * self.psi

    def apply_B_hat(self, mu, linear_only=False):
        g = self.grid
        prod = self.linear_products()
        if not linear_only:
            prod = prod + self.cubic(mu)
        return 0.5 * g.dk2 * self.psi_hat + g.dealias_mask * fft(prod, g)

    def source_hat(self, coupling, b_hat):
        """Dealiased ``2 Lambda Re(conj(psi) b)`` for a given ``b = B psi``."""
        g = self.grid
        b = ifft(b_hat, g)
        values = 2.0 * coupling * np.real(np.conj(self.psi) * b)
        return g.dealias_mask * fft(values, g), b

    def momentum_hat(self, coupling, b, source):
        """Dealiased ``-2 Lambda Im(grad conj(psi) b) - u * source``.

        ``b`` and ``source`` are physical-space arrays; ``source`` already
        carries the factor ``2 Lambda``.
        """
        g = self.grid
        force = -2.0 * coupling * np.imag(np.conj(self.grad_psi) * b) - self.u * source
        return g.dealias_mask * fft(force, g)


def apply_B(psi, u, params):
    """``-Delta psi / 2 + i u.grad psi + |u|^2 psi / 2 + mu |psi|^2 psi``."""
    _check_pair(psi, u)
    terms = CouplingTerms(psi.grid, psi.coeffs, u.coeffs)
    return SpectralScalarField(psi.grid, terms.apply_B_hat(params.interaction))


def apply_BL(psi, u, params):
    """The part of B linear in psi."""
    _check_pair(psi, u)
    terms = CouplingTerms(psi.grid, psi.coeffs, u.coeffs)
    return SpectralScalarField(psi.grid, terms.apply_B_hat(params.interaction, linear_only=True))


def coupling_source(psi, u, params, Bpsi=None):
    """Mass transfer rate ``2 Lambda Re(conj(psi) B psi)`` as a real field.

    Pass ``Bpsi`` to reuse an already computed (for instance truncated) B psi.
    """
    _check_pair(psi, u)
    terms = CouplingTerms(psi.grid, psi.coeffs, u.coeffs)
    b_hat = terms.apply_B_hat(params.interaction) if Bpsi is None else Bpsi.coeffs
    src_hat, _ = terms.source_hat(params.coupling, b_hat)
    return SpectralScalarField(psi.grid, src_hat, True)


def momentum_source(psi, u, params, Bpsi=None):
    """Momentum forcing ``-2 Lambda Im(grad conj(psi) B psi) - 2 Lambda u Re(conj(psi) B psi)``.

    Returned unprojected, one real field per axis.
    """
    _check_pair(psi, u)
    g = psi.grid
    terms = CouplingTerms(g, psi.coeffs, u.coeffs)
    b_hat = terms.apply_B_hat(params.interaction) if Bpsi is None else Bpsi.coeffs
    src_hat, b = terms.source_hat(params.coupling, b_hat)
    source = ifft(src_hat, g).real
    force = terms.momentum_hat(params.coupling, b, source)
    return tuple(SpectralScalarField(g, f, True) for f in force)


def zero_velocity(grid):
    return VelocityField.zeros(grid)
