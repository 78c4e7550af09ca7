"""Semi-Galerkin right-hand sides and time steppers.

The wavefunction and the velocity are truncated to modes with ``|n_j| <= N``;
the density lives on the full (dealiased) grid. The velocity is advanced
through its coefficients in a real orthonormal divergence-free Fourier basis,
with the density-weighted mass matrix inverted at every stage.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .coupling import CouplingTerms, coupling_source
from .errors import ContractionError, DensityFloorError, ParameterError
from .spectral import Grid, SpectralScalarField, VelocityField, fft, ifft


def default_cutoff(grid):
    """Largest cutoff whose quadratic products stay inside the two-thirds band."""
    return max(1, min(grid.shape) // 6)


@dataclass(frozen=True, eq=False)
class GalerkinTruncation:
    """Projectors onto modes with every ``|n_j| <= cutoff``.

    The same mask realises Q^N for the wavefunction and, together with the
    Leray projection, P^N for the velocity.
    """

    grid: Grid
    cutoff: int

    def __post_init__(self):
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ParameterError(f"cutoff must be a positive integer, got {self.cutoff}")
        if self.cutoff > self.grid.dealias_cutoff:
            raise ParameterError(
                f"cutoff {self.cutoff} exceeds the two-thirds dealiasing limit {self.grid.dealias_cutoff}"
            )
        object.__setattr__(self, "cutoff", int(self.cutoff))

    @cached_property
    def mask(self):
        return self.grid.band_mask(self.cutoff)

    def project(self, field):
        return SpectralScalarField(field.grid, field.coeffs * self.mask, field.real)

    def project_velocity(self, u):
        return VelocityField(u.grid, u.coeffs * self.mask)

    @cached_property
    def basis(self):
        return VelocityBasis(self.grid, self.cutoff)


class VelocityBasis:
    """Real orthonormal divergence-free Fourier basis of the truncated velocity space.

    Basis functions are ``e_i / sqrt(V)`` for the mean flow and
    ``sqrt(2/V) cos(k.x) e_p(k)``, ``sqrt(2/V) sin(k.x) e_p(k)`` for ``k`` in a
    half space, with ``e_p(k)`` an orthonormal frame of the plane normal to k.
    Each real function is a combination of at most two complex exponentials
    ``phi_m = exp(i k_m.x) e_m / sqrt(V)``, which is how the mass matrix is
    gathered directly from the density's Fourier coefficients.
    """

    def __init__(self, grid, cutoff):
        self.grid = grid
        self.cutoff = cutoff
        d = grid.dim
        ranges = [np.arange(-cutoff, cutoff + 1)] * d
        modes = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, d)
        first = np.array([next((v for v in n if v != 0), 0) for n in modes])
        half = modes[first > 0]

        c_modes, c_pols = [], []
        w1, w2, m1, m2 = [], [], [], []
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            c_modes.append(np.zeros(d, dtype=int))
            c_pols.append(e)
            w1.append(1.0)
            w2.append(0.0)
            m1.append(len(c_modes) - 1)
            m2.append(len(c_modes) - 1)
        s = 1.0 / np.sqrt(2.0)
        for n in half:
            kvec = 2 * np.pi * n / np.array(grid.lengths)
            for e in _normal_frame(kvec):
                c_modes.append(n)
                c_pols.append(e)
                c_modes.append(-n)
                c_pols.append(e)
                plus, minus = len(c_modes) - 2, len(c_modes) - 1
                # cosine then sine function
                w1 += [s, -1j * s]
                w2 += [s, 1j * s]
                m1 += [plus, plus]
                m2 += [minus, minus]

        self.modes = np.array(c_modes, dtype=np.int64)
        self.pols = np.array(c_pols, dtype=float)
        self.w1 = np.array(w1, dtype=complex)
        self.w2 = np.array(w2, dtype=complex)
        self.m1 = np.array(m1)
        self.m2 = np.array(m2)
        self.size = len(self.w1)
        wrapped = np.mod(self.modes, np.array(grid.shape))
        self.flat = np.ravel_multi_index(tuple(wrapped.T), grid.shape)

        # Gather tables for R_jl = sum_ab conj(w_a,j) w_b,l rhohat(k_ma,j - k_mb,l) e.e
        idx_all, weight_all = [], []
        for wa, ma in ((self.w1, self.m1), (self.w2, self.m2)):
            for wb, mb in ((self.w1, self.m1), (self.w2, self.m2)):
                diff = self.modes[ma][:, None, :] - self.modes[mb][None, :, :]
                diff = np.mod(diff, np.array(grid.shape))
                idx_all.append(np.ravel_multi_index(tuple(np.moveaxis(diff, -1, 0)), grid.shape))
                dots = self.pols[ma] @ self.pols[mb].T
                weight_all.append(np.conj(wa)[:, None] * wb[None, :] * dots)
        self._idx = np.stack(idx_all)
        self._weight = np.stack(weight_all)

    def mass_matrix(self, rho_hat):
        R = np.einsum("aij,aij->ij", self._weight, rho_hat.ravel()[self._idx]).real
        return 0.5 * (R + R.T)

    def coeffs_from_field(self, u_hat):
        """``c_j = <a_j, u>`` for a velocity coefficient array of shape ``(d, *shape)``."""
        d = self.grid.dim
        uk = u_hat.reshape(d, -1)[:, self.flat].T
        g = np.sqrt(self.grid.volume) * np.sum(self.pols * uk, axis=1)
        return np.real(np.conj(self.w1) * g[self.m1] + np.conj(self.w2) * g[self.m2])

    def field_from_coeffs(self, c):
        amp = np.zeros(len(self.modes), dtype=complex)
        np.add.at(amp, self.m1, c * self.w1)
        np.add.at(amp, self.m2, c * self.w2)
        d = self.grid.dim
        out = np.zeros((d, self.grid.size), dtype=complex)
        vec = (amp[:, None] * self.pols).T / np.sqrt(self.grid.volume)
        for i in range(d):
            np.add.at(out[i], self.flat, vec[i])
        return out.reshape(d, *self.grid.shape)

    @cached_property
    def sampled(self):
        """Basis functions sampled on the grid, shape ``(size, d, *grid.shape)``."""
        out = np.empty((self.size, self.grid.dim, *self.grid.shape))
        for j in range(self.size):
            c = np.zeros(self.size)
            c[j] = 1.0
            out[j] = ifft(self.field_from_coeffs(c), self.grid).real
        return out


def _normal_frame(k):
    """Orthonormal basis of the plane normal to ``k`` (empty in 1D)."""
    d = k.size
    if d == 1:
        return []
    if d == 2:
        return [np.array([-k[1], k[0]]) / np.linalg.norm(k)]
    khat = k / np.linalg.norm(k)
    trial = np.eye(3)[np.argmin(np.abs(khat))]
    e1 = trial - khat * (khat @ trial)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(khat, e1)
    return [e1, e2]


@dataclass(frozen=True, eq=False)
class SimState:
    """Triplet (psi, u, rho) with the clock and the dissipation integrals.

    ``energy0`` is the energy of the initial data, carried along so that the
    energy residual can be evaluated from any state.
    """

    psi: SpectralScalarField
    u: VelocityField
    rho: SpectralScalarField
    t: float = 0.0
    viscous_dissipation: float = 0.0
    coupling_dissipation: float = 0.0
    energy0: float = 0.0

    @property
    def grid(self):
        return self.psi.grid

    def replace(self, **changes):
        return replace(self, **changes)


def truncate_state(s, trunc):
    """Zero psi and u outside the cutoff; the density is left untouched."""
    return s.replace(psi=trunc.project(s.psi), u=trunc.project_velocity(s.u))


def mass_floor_check(rho_phys, params, t=None):
    lo = float(rho_phys.min())
    if lo < params.density_floor:
        raise DensityFloorError(lo, params.density_floor, t)
    return lo


def assemble_mass_matrix(rho, trunc, params=None):
    """``R_jk = int rho a_j . a_k`` over the truncated divergence-free basis.

    With ``params`` given the density floor is enforced first.
    """
    if params is not None:
        mass_floor_check(rho.physical(), params)
    return trunc.basis.mass_matrix(rho.coeffs)


@dataclass
class Rates:
    """Time derivatives of every evolved quantity at one state."""

    psi: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    viscous: float
    coupling: float
    b_hat: np.ndarray = None
    source_hat: np.ndarray = None
    u_coeff_rate: np.ndarray = None


class GalerkinSystem:
    """Right-hand side of the truncated coupled system for one truncation and parameter set."""

    def __init__(self, trunc, params):
        self.trunc = trunc
        self.params = params
        self.grid = trunc.grid
        self.basis = trunc.basis

    def coupling_field(self, terms):
        """Truncated ``Q^N B psi`` used by all three equations."""
        return self.trunc.mask * terms.apply_B_hat(self.params.interaction)

    def nls(self, terms, b_hat):
        g = self.grid
        mu = self.params.interaction
        ham = 0.5 * g.dk2 * terms.psi_hat + g.dealias_mask * fft(terms.cubic(mu), g)
        return self.trunc.mask * (-1j * ham) - self.params.coupling * b_hat

    def _physical(self, psi_hat, u_hat, rho_hat):
        """All grid fields a stage needs, from one batched inverse transform."""
        g = self.grid
        d = g.dim
        ik = [1j * kj for kj in g.dk]
        stack = [psi_hat, *(k * psi_hat for k in ik), *u_hat, rho_hat, *(k * rho_hat for k in ik)]
        stack += [k * ui for ui in u_hat for k in ik]
        out = ifft(np.stack(stack), g)
        psi, grad_psi = out[0], out[1:1 + d]
        u = out[1 + d:1 + 2 * d].real
        rho = out[1 + 2 * d].real
        grad_rho = out[2 + 2 * d:2 + 3 * d].real
        grad_u = out[2 + 3 * d:].real.reshape(d, d, *g.shape)
        return psi, grad_psi, u, rho, grad_rho, grad_u

    def rates(self, psi_hat, u_hat, rho_hat, check_floor=True, t=None):
        """Time derivatives of the truncated system.

        The momentum advection is used in the skew form
        ``(rho u.grad u + div(rho u u) - (u.grad rho) u) / 2`` with the same
        dealiased ``u.grad rho`` as the continuity equation, so the kinetic
        energy balance closes on the grid. Transforms are batched; dealiasing
        of terms that only feed retained modes is omitted as it changes nothing.
        """
        g = self.grid
        p = self.params
        d = g.dim
        psi, grad_psi, u, rho, grad_rho, grad_u = self._physical(psi_hat, u_hat, rho_hat)
        if check_floor:
            mass_floor_check(rho, p, t)

        cubic = p.interaction * np.abs(psi) ** 2 * psi
        linear = 1j * np.sum(u * grad_psi, axis=0) + 0.5 * np.sum(u**2, axis=0) * psi
        flux = rho * u[:, None] * u[None, :]
        fwd = fft(np.stack([linear + cubic, cubic, np.sum(u * grad_rho, axis=0),
                            *flux.reshape(d * d, *g.shape)]), g)
        lap_psi = 0.5 * g.dk2 * psi_hat
        b_hat = self.trunc.mask * (lap_psi + fwd[0])
        dpsi = self.trunc.mask * (-1j * (lap_psi + fwd[1])) - p.coupling * b_hat
        advect_hat = g.dealias_mask * fwd[2]
        flux_hat = fwd[3:].reshape(d, d, *g.shape)
        div_flux = sum(1j * g.dk[j] * flux_hat[:, j] for j in range(d))

        back = ifft(np.stack([b_hat, advect_hat]), g)
        b, advect = back[0], back[1].real
        source_hat = g.dealias_mask * fft(2.0 * p.coupling * np.real(np.conj(psi) * b), g)
        source = ifft(source_hat, g).real
        drho = source_hat - advect_hat

        conv = np.einsum("j...,ij...->i...", u, grad_u)
        force = -2.0 * p.coupling * np.imag(np.conj(grad_psi) * b) - u * source
        phys = force - 0.5 * rho * conv + 0.5 * advect * u
        G_hat = -p.viscosity * g.dk2 * u_hat - 0.5 * div_flux + fft(phys, g)
        G = self.basis.coeffs_from_field(G_hat)
        R = self.basis.mass_matrix(rho_hat)
        try:
            dc = cho_solve(cho_factor(R), G)
        except LinAlgError as exc:
            raise DensityFloorError(rho.min(), p.density_floor, t) from exc
        du = self.basis.field_from_coeffs(dc)

        viscous = p.viscosity * g.volume * float(np.sum(g.dk2 * np.abs(u_hat) ** 2))
        coupling = 2.0 * p.coupling * g.volume * float(np.sum(np.abs(b_hat) ** 2))
        return Rates(dpsi, du, drho, viscous, coupling, b_hat, source_hat, dc)


def nls_rhs(psi, u, params, trunc=None):
    """``-(1/2i) Delta psi + (mu/i)|psi|^2 psi - Lambda B psi`` re-truncated to the cutoff."""
    g = psi.grid
    if trunc is None:
        trunc = GalerkinTruncation(g, g.dealias_cutoff)
    system = GalerkinSystem(trunc, params)
    terms = CouplingTerms(g, psi.coeffs, u.coeffs)
    return SpectralScalarField(g, system.nls(terms, system.coupling_field(terms)))


def nse_coeff_rhs(s, trunc, params):
    """Velocity coefficient derivative ``dc/dt = R^{-1} G``."""
    system = GalerkinSystem(trunc, params)
    return system.rates(s.psi.coeffs, s.u.coeffs, s.rho.coeffs, t=s.t).u_coeff_rate


def continuity_rhs(s, params):
    """``-u.grad rho + 2 Lambda Re(conj(psi) B psi)``, dealiased."""
    g = s.grid
    rho_hat = s.rho.coeffs
    u = ifft(s.u.coeffs, g).real
    grad_rho = ifft(np.stack([1j * kj * rho_hat for kj in g.dk]), g).real
    advect_hat = g.dealias_mask * fft(np.sum(u * grad_rho, axis=0), g)
    source = coupling_source(s.psi, s.u, params)
    return SpectralScalarField(g, source.coeffs - advect_hat, True)


@dataclass
class _Vec:
    psi: np.ndarray
    u: np.ndarray
    rho: np.ndarray
    visc: float
    coup: float

    @classmethod
    def of(cls, s):
        return cls(s.psi.coeffs, s.u.coeffs, s.rho.coeffs, s.viscous_dissipation, s.coupling_dissipation)

    def axpy(self, a, r):
        return _Vec(self.psi + a * r.psi, self.u + a * r.u, self.rho + a * r.rho,
                    self.visc + a * r.viscous, self.coup + a * r.coupling)

    def state(self, s, t, trunc):
        g = s.grid
        return s.replace(
            psi=SpectralScalarField(g, self.psi * trunc.mask),
            u=VelocityField(g, self.u * trunc.mask),
            rho=SpectralScalarField(g, self.rho, True),
            t=t,
            viscous_dissipation=self.visc,
            coupling_dissipation=self.coup,
        )


def rk4_step(s, dt, trunc, params, system=None, check_floor=True):
    """One classical Runge-Kutta step of the coupled system.

    Dissipation integrals are advanced as extra components, which makes their
    quadrature Simpson's rule on the stage values. Raises DensityFloorError if
    any stage density falls below the floor, unless ``check_floor`` is off.
    """
    if dt <= 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    if system is None:
        system = GalerkinSystem(trunc, params)
    mask = trunc.mask
    y = _Vec.of(s)

    def f(v, t):
        return system.rates(v.psi * mask, v.u * mask, v.rho, check_floor=check_floor, t=t)

    k1 = f(y, s.t)
    k2 = f(y.axpy(0.5 * dt, k1), s.t + 0.5 * dt)
    k3 = f(y.axpy(0.5 * dt, k2), s.t + 0.5 * dt)
    k4 = f(y.axpy(dt, k3), s.t + dt)
    out = _Vec(
        y.psi + dt / 6.0 * (k1.psi + 2 * k2.psi + 2 * k3.psi + k4.psi),
        y.u + dt / 6.0 * (k1.u + 2 * k2.u + 2 * k3.u + k4.u),
        y.rho + dt / 6.0 * (k1.rho + 2 * k2.rho + 2 * k3.rho + k4.rho),
        y.visc + dt / 6.0 * (k1.viscous + 2 * k2.viscous + 2 * k3.viscous + k4.viscous),
        y.coup + dt / 6.0 * (k1.coupling + 2 * k2.coupling + 2 * k3.coupling + k4.coupling),
    )
    return out.state(s, s.t + dt, trunc)


def _l2(grid, a):
    return float(np.sqrt(grid.volume * np.sum(np.abs(a) ** 2)))


def picard_step(s, dt, trunc, params, tol=1e-10, max_iter=50, system=None, check_floor=True):
    """Implicit-midpoint step solved by fixed-point iteration of its mild form.

    Iterates ``z <- s + dt * RHS((s + z) / 2)`` until successive iterates
    differ by less than ``tol`` in ``|dpsi| + |du| + |drho|`` (L2 norms).
    Returns the new state and the number of iterations taken.
    """
    if dt <= 0:
        raise ParameterError(f"time step must be positive, got {dt}")
    if tol <= 0:
        raise ParameterError(f"tolerance must be positive, got {tol}")
    if system is None:
        system = GalerkinSystem(trunc, params)
    g = s.grid
    mask = trunc.mask
    y = _Vec.of(s)
    z = y
    tmid = s.t + 0.5 * dt
    for it in range(1, max_iter + 1):
        mid = _Vec(0.5 * (y.psi + z.psi), 0.5 * (y.u + z.u), 0.5 * (y.rho + z.rho), 0.0, 0.0)
        r = system.rates(mid.psi * mask, mid.u * mask, mid.rho, check_floor=check_floor, t=tmid)
        new = y.axpy(dt, r)
        new = _Vec(new.psi * mask, new.u * mask, new.rho, new.visc, new.coup)
        diff = _l2(g, new.psi - z.psi) + _l2(g, new.u - z.u) + _l2(g, new.rho - z.rho)
        z = new
        if diff < tol:
            return z.state(s, s.t + dt, trunc), it
    raise ContractionError(
        f"Picard iteration did not converge in {max_iter} iterations (last update {diff:.3e}); reduce dt"
    )
