"""Per-step ledger of masses, energies and a priori monitor quantities."""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields

import numpy as np
from scipy.integrate import trapezoid

from .coupling import CouplingTerms
from .errors import DensityFloorError, ParameterError
from .galerkin import GalerkinSystem, GalerkinTruncation, default_cutoff
from .spectral import evaluate_coeffs, ifft


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    superfluid_mass: float
    normal_mass: float
    total_mass: float
    kinetic_energy: float
    gradient_energy: float
    potential_energy: float
    viscous_dissipation: float
    coupling_dissipation: float
    energy_residual: float
    min_rho: float
    max_rho: float
    X: float
    Y: float
    Bpsi_inf: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def values(self):
        return [getattr(self, name) for name in self.columns()]

    @property
    def energy(self):
        return self.kinetic_energy + self.gradient_energy + self.potential_energy


def energy(s, params):
    """``|sqrt(rho) u|^2 / 2 + |grad psi|^2 / 2 + mu |psi|_4^4 / 2`` by grid quadrature."""
    g = s.grid
    dV = g.cell_volume
    rho = s.rho.physical()
    u = s.u.physical()
    psi = s.psi.physical()
    kinetic = 0.5 * dV * float(np.sum(rho * np.sum(u**2, axis=0)))
    gradient = 0.5 * g.volume * float(np.sum(g.dk2 * np.abs(s.psi.coeffs) ** 2))
    potential = 0.5 * params.interaction * dV * float(np.sum(np.abs(psi) ** 4))
    return kinetic, gradient, potential


def compute_diagnostics(s, params, trunc=None):
    g = s.grid
    if trunc is None:
        trunc = GalerkinTruncation(g, default_cutoff(g))
    dV = g.cell_volume
    V = g.volume
    rho = s.rho.physical()
    kinetic, gradient, potential = energy(s, params)
    superfluid = V * float(np.sum(np.abs(s.psi.coeffs) ** 2))
    normal = dV * float(np.sum(rho))

    e_now = kinetic + gradient + potential + s.viscous_dissipation + s.coupling_dissipation
    residual = abs(e_now - s.energy0)
    if s.energy0 > 0:
        residual /= s.energy0

    system = GalerkinSystem(trunc, params)
    try:
        r = system.rates(s.psi.coeffs, s.u.coeffs, s.rho.coeffs, check_floor=False)
        b_hat = r.b_hat
        u_t = ifft(r.u, g).real
        accel = dV * float(np.sum(rho * np.sum(u_t**2, axis=0)))
    except DensityFloorError:
        b_hat = system.coupling_field(CouplingTerms(g, s.psi.coeffs, s.u.coeffs))
        # the weight rho vanishes identically, otherwise u_t is undefined
        accel = 0.0 if not np.any(rho) else float("nan")

    lap_psi = V * float(np.sum(g.dk2**2 * np.abs(s.psi.coeffs) ** 2))
    grad_u = V * float(np.sum(g.dk2 * np.abs(s.u.coeffs) ** 2))
    lap_u = V * float(np.sum(g.dk2**2 * np.abs(s.u.coeffs) ** 2))
    grad_b = V * float(np.sum(g.dk2 * np.abs(b_hat) ** 2))
    X = 1.0 + lap_psi + params.viscosity * grad_u
    Y = params.coupling * grad_b + accel + params.viscosity**2 / params.density_upper * lap_u

    return DiagnosticsRecord(
        t=float(s.t),
        superfluid_mass=superfluid,
        normal_mass=normal,
        total_mass=superfluid + normal,
        kinetic_energy=kinetic,
        gradient_energy=gradient,
        potential_energy=potential,
        viscous_dissipation=float(s.viscous_dissipation),
        coupling_dissipation=float(s.coupling_dissipation),
        energy_residual=residual,
        min_rho=float(rho.min()),
        max_rho=float(rho.max()),
        X=X,
        Y=Y,
        Bpsi_inf=float(np.abs(ifft(b_hat, g)).max()),
    )


class Status(enum.Enum):
    CONTINUE = "continue"
    HALT = "halt"


@dataclass(frozen=True)
class MonitorResult:
    status: Status
    min_rho: float
    t: float

    @property
    def halted(self):
        return self.status is Status.HALT


def existence_monitor(s, params):
    """Halt once the grid minimum of the density drops below epsilon."""
    lo = float(s.rho.physical().min())
    status = Status.HALT if lo < params.density_floor else Status.CONTINUE
    return MonitorResult(status, lo, float(s.t))


@dataclass(frozen=True)
class MadelungFields:
    """Superfluid density and velocity; ``velocity`` is NaN where ``valid`` is False."""

    density: np.ndarray
    velocity: np.ndarray
    valid: np.ndarray


def madelung(psi, vacuum_threshold):
    """Polar decomposition: ``rho_s = |psi|^2``, ``v_s = Im(conj(psi) grad psi) / |psi|^2``."""
    if vacuum_threshold <= 0:
        raise ParameterError(f"vacuum threshold must be positive, got {vacuum_threshold}")
    g = psi.grid
    values = ifft(psi.coeffs, g)
    grad = ifft(np.stack([1j * kj * psi.coeffs for kj in g.dk]), g)
    density = np.abs(values) ** 2
    valid = density >= vacuum_threshold
    with np.errstate(divide="ignore", invalid="ignore"):
        velocity = np.imag(np.conj(values) * grad) / density
    velocity = np.where(valid, velocity, np.nan)
    return MadelungFields(density, velocity, valid)


def circulation(psi, center, radius, n_points=256, vacuum_threshold=1e-12):
    """Loop integral of the superfluid velocity around a circle in the first two axes.

    psi and its gradient are evaluated off-grid by trigonometric interpolation
    and the periodic trapezoid rule is used on the contour.
    """
    g = psi.grid
    if g.dim < 2:
        raise ParameterError("circulation needs at least two dimensions")
    theta = 2 * np.pi * np.arange(n_points) / n_points
    center = np.asarray(center, dtype=float)
    pts = np.tile(center, (n_points, 1))
    pts[:, 0] += radius * np.cos(theta)
    pts[:, 1] += radius * np.sin(theta)
    stacked = np.stack([psi.coeffs] + [1j * kj * psi.coeffs for kj in g.dk[:2]])
    vals = evaluate_coeffs(stacked, g, pts)
    amp = np.abs(vals[0]) ** 2
    if amp.min() < vacuum_threshold:
        raise ParameterError("contour passes through a vacuum region")
    vx = np.imag(np.conj(vals[0]) * vals[1]) / amp
    vy = np.imag(np.conj(vals[0]) * vals[2]) / amp
    tangent = radius * (-np.sin(theta) * vx + np.cos(theta) * vy)
    return float(np.sum(tangent) * 2 * np.pi / n_points)


@dataclass(frozen=True)
class GronwallReport:
    x0: float
    max_ratio: float
    x_bound_holds: bool
    y_integral: float
    y_bound_holds: bool

    @property
    def holds(self):
        return self.x_bound_holds and self.y_bound_holds


def gronwall_monitor(records, x0=None):
    """Check ``X(t) <= 2 X0`` and ``int Y dt <= 31 X0`` on a recorded run.

    Violations are reported, not raised: the bounds come with unsharp constants.
    """
    records = list(records)
    if not records:
        raise ParameterError("gronwall monitor needs at least one diagnostics record")
    t = np.array([r.t for r in records])
    X = np.array([r.X for r in records])
    Y = np.array([r.Y for r in records])
    if x0 is None:
        x0 = float(X[0])
    y_int = float(trapezoid(Y, t)) if len(records) > 1 else 0.0
    return GronwallReport(
        x0=x0,
        max_ratio=float(X.max() / x0),
        x_bound_holds=bool(np.all(X <= 2 * x0)),
        y_integral=y_int,
        y_bound_holds=bool(y_int <= 31 * x0),
    )
