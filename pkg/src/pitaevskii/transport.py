"""Method-of-characteristics solution of the sourced continuity equation.

This is an independent route to the density: trajectories of the stored
velocity history are integrated with RK4 and the coupling source is
accumulated along them. It shares no time stepping with the spectral solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .coupling import CouplingTerms
from .errors import ParameterError, TemporalCoverageError
from .spectral import Grid, evaluate_coeffs

_TIME_TOL = 1e-12


@dataclass
class History:
    """Fields stored at every accepted step, in coefficient form."""

    grid: Grid
    times: list = field(default_factory=list)
    psi: list = field(default_factory=list)
    u: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    source: list = field(default_factory=list)

    def append(self, state, source_hat):
        if self.times and state.t <= self.times[-1]:
            raise ParameterError("history times must increase")
        self.times.append(float(state.t))
        self.psi.append(state.psi.coeffs.copy())
        self.u.append(state.u.coeffs.copy())
        self.rho.append(state.rho.coeffs.copy())
        self.source.append(np.asarray(source_hat).copy())

    def __len__(self):
        return len(self.times)

    def save(self, path):
        np.savez_compressed(
            path,
            shape=np.array(self.grid.shape),
            lengths=np.array(self.grid.lengths),
            times=np.array(self.times),
            psi=np.array(self.psi),
            u=np.array(self.u),
            rho=np.array(self.rho),
            source=np.array(self.source),
        )

    @classmethod
    def load(cls, path):
        with np.load(path) as data:
            grid = Grid(tuple(data["shape"]), tuple(data["lengths"]))
            return cls(grid, list(data["times"]), list(data["psi"]), list(data["u"]),
                       list(data["rho"]), list(data["source"]))

    def covers(self, t0, t1):
        lo, hi = min(t0, t1), max(t0, t1)
        if not self.times or lo < self.times[0] - _TIME_TOL or hi > self.times[-1] + _TIME_TOL:
            span = (self.times[0], self.times[-1]) if self.times else None
            raise TemporalCoverageError(f"history {span} does not cover [{lo}, {hi}]")

    def _bracket(self, t):
        times = self.times
        j = int(np.searchsorted(times, t, side="right")) - 1
        j = min(max(j, 0), len(times) - 2) if len(times) > 1 else 0
        if len(times) == 1:
            return 0, 0, 0.0
        theta = (t - times[j]) / (times[j + 1] - times[j])
        return j, j + 1, min(max(theta, 0.0), 1.0)

    def interpolate(self, name, t):
        """Linear-in-time interpolation of a stored coefficient sequence."""
        seq = getattr(self, name)
        a, b, theta = self._bracket(t)
        if theta == 0.0:
            return seq[a]
        if theta == 1.0:
            return seq[b]
        return (1.0 - theta) * seq[a] + theta * seq[b]


@dataclass
class CharacteristicTrace:
    seed: np.ndarray
    times: np.ndarray
    positions: np.ndarray
    accumulated_source: float = 0.0

    @property
    def final(self):
        return self.positions[-1]


def _wrap(x, grid):
    return np.mod(x, np.array(grid.lengths))


def _sample_times(history, t0, t1):
    times = np.array(history.times)
    inner = times[(times > min(t0, t1) + _TIME_TOL) & (times < max(t0, t1) - _TIME_TOL)]
    samples = np.concatenate([[t0], np.sort(inner), [t1]])
    return samples if t1 >= t0 else np.concatenate([[t0], np.sort(inner)[::-1], [t1]])


def integrate_paths(history, points, t0, t1, dt_sub):
    """RK4 trajectories of ``dX/dt = u(t, X)`` from ``t0`` to ``t1`` (either direction).

    Returns the sample times (in integration order) and positions with shape
    ``(nsamples, npoints, dim)``, unwrapped.
    """
    if dt_sub <= 0:
        raise ParameterError(f"substep must be positive, got {dt_sub}")
    history.covers(t0, t1)
    grid = history.grid
    x = np.array(points, dtype=float, copy=True).reshape(-1, grid.dim)
    samples = _sample_times(history, t0, t1)
    out = [x.copy()]

    def velocity(t, pos):
        return evaluate_coeffs(history.interpolate("u", t), grid, pos).real.T

    for ta, tb in zip(samples[:-1], samples[1:]):
        span = tb - ta
        if span == 0:
            out.append(x.copy())
            continue
        nsub = max(1, math.ceil(abs(span) / dt_sub - 1e-9))
        h = span / nsub
        for i in range(nsub):
            t = ta + i * h
            k1 = velocity(t, x)
            k2 = velocity(t + 0.5 * h, x + 0.5 * h * k1)
            k3 = velocity(t + 0.5 * h, x + 0.5 * h * k2)
            k4 = velocity(t + h, x + h * k3)
            x = x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(x.copy())
    return samples, np.array(out)


def trace_characteristics(history, seeds, dt_sub, t_start=None, t_end=None):
    """Trajectories from each seed; times are reported in ascending order."""
    t_start = history.times[0] if t_start is None else t_start
    t_end = history.times[-1] if t_end is None else t_end
    grid = history.grid
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    samples, paths = integrate_paths(history, seeds, t_start, t_end, dt_sub)
    order = np.argsort(samples, kind="stable")
    traces = []
    for i, seed in enumerate(seeds):
        traces.append(CharacteristicTrace(seed.copy(), samples[order], _wrap(paths[order, i], grid)))
    return traces


def _sources(history, params, trunc):
    if history.source and all(s is not None for s in history.source):
        return history
    if params is None or trunc is None:
        raise ParameterError("history carries no coupling source; pass params and trunc")
    for j, (psi_hat, u_hat) in enumerate(zip(history.psi, history.u)):
        terms = CouplingTerms(history.grid, psi_hat, u_hat)
        b_hat = trunc.mask * terms.apply_B_hat(params.interaction)
        history.source[j] = terms.source_hat(params.coupling, b_hat)[0]
    return history


def density_oracle(rho0, history, points, t, params=None, dt_sub=None, trunc=None):
    """Density at ``(t, x)`` for each query point, from backward characteristics.

    ``rho(t, x) = rho0(alpha) + int_0^t source(tau, X_alpha(tau)) dtau`` with
    ``alpha`` the foot of the characteristic through ``x``; the time integral
    uses Simpson's rule on the stored history times.
    """
    grid = history.grid
    t0 = history.times[0]
    history.covers(t0, t)
    if dt_sub is None:
        dt_sub = np.min(np.diff(history.times)) if len(history) > 1 else 1e-3
    _sources(history, params, trunc)
    samples, paths = integrate_paths(history, points, t, t0, dt_sub)
    samples = samples[::-1]
    paths = paths[::-1]
    foot = paths[0]
    base = evaluate_coeffs(rho0.coeffs, grid, foot).real
    if t <= t0:
        return base
    src = np.stack([evaluate_coeffs(history.interpolate("source", tau), grid, x).real
                    for tau, x in zip(samples, paths)])
    return base + simpson(src, x=samples, axis=0)


def renormalized_check(history, params=None, trunc=None):
    """Relative defect of ``int rho^2 (t) = int rho0^2 + 2 int_0^t int rho * source``."""
    _sources(history, params, trunc)
    V = history.grid.volume
    times = np.array(history.times)
    sq = np.array([V * np.sum(np.abs(r) ** 2) for r in history.rho])
    prod = np.array([V * np.real(np.vdot(r, s)) for r, s in zip(history.rho, history.source)])
    if len(times) < 2:
        return 0.0
    integral = simpson(prod, x=times)
    scale = sq[0] if sq[0] > 0 else 1.0
    return float(abs(sq[-1] - sq[0] - 2.0 * integral) / scale)
