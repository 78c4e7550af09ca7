"""The simulation loop and the run-directory layout.

A run directory holds ``config.ini`` (the echo of the run configuration),
``diagnostics.csv``, ``checkpoint_<step>.bin`` files, ``run.json`` with the
outcome, and ``history.npz`` when history storage is enabled.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .config import Stepper, serialize_config
from .coupling import CouplingTerms
from .diagnostics import compute_diagnostics, existence_monitor
from .errors import CheckpointError, ContractionError, DensityFloorError, ParameterError, PitaevskiiError
from .galerkin import GalerkinSystem, picard_step, rk4_step
from .initial_data import build_initial_state
from .persistence import atomic_write, emit_diagnostics, read_checkpoint, read_diagnostics, write_checkpoint
from .spectral import SpectralScalarField
from .transport import History, density_oracle, renormalized_check

OUTPUT_ENV = "PITAEVSKII_OUTPUT_DIR"
CSV_NAME = "diagnostics.csv"
HISTORY_NAME = "history.npz"
STATUS_NAME = "run.json"
CONFIG_NAME = "config.ini"


class Outcome(str, enum.Enum):
    COMPLETED = "completed"
    HALTED = "halted_density_floor"
    FAILED = "stepper_failure"


EXIT_CODES = {Outcome.COMPLETED: 0, Outcome.HALTED: 2, Outcome.FAILED: 1}


@dataclass
class RunReport:
    outcome: Outcome
    t: float
    steps: int
    message: str = ""
    records: list = field(default_factory=list, repr=False)
    state: object = field(default=None, repr=False)
    history: History = field(default=None, repr=False)
    output_dir: str = None
    checkpoint: str = None

    @property
    def exit_code(self):
        return EXIT_CODES[self.outcome]


class StepperFailure(PitaevskiiError):
    """A step could not be completed even after every allowed dt halving."""


def checkpoint_name(step):
    return f"checkpoint_{step:08d}.bin"


def resolve_output_dir(explicit=None, config=None):
    """Explicit argument, then the config, then the environment variable."""
    if explicit:
        return explicit
    if config is not None and config.output_dir:
        return config.output_dir
    return os.environ.get(OUTPUT_ENV) or None


def _single_step(state, dt, cfg, trunc, system, check_floor):
    if cfg.stepper is Stepper.PICARD:
        new, _ = picard_step(state, dt, trunc, cfg.params, cfg.picard_tol, cfg.picard_max_iter,
                             system=system, check_floor=check_floor)
        return new
    return rk4_step(state, dt, trunc, cfg.params, system=system, check_floor=check_floor)


def advance(state, dt, cfg, trunc, system, depth=0):
    """One step of size dt, retried as two half steps on stage rejection.

    Once the halving budget is spent a stage density below the floor is
    accepted (the mass matrix is still positive definite) so that the
    monitor, not the stepper, decides whether the run halts.
    """
    try:
        return _single_step(state, dt, cfg, trunc, system, check_floor=True)
    except (DensityFloorError, ContractionError) as exc:
        if depth < cfg.max_halvings:
            half = advance(state, 0.5 * dt, cfg, trunc, system, depth + 1)
            return advance(half, 0.5 * dt, cfg, trunc, system, depth + 1)
        if isinstance(exc, DensityFloorError):
            try:
                return _single_step(state, dt, cfg, trunc, system, check_floor=False)
            except (DensityFloorError, ContractionError) as inner:
                raise StepperFailure(str(inner)) from inner
        raise StepperFailure(str(exc)) from exc


def _source_hat(state, system):
    terms = CouplingTerms(state.grid, state.psi.coeffs, state.u.coeffs)
    return terms.source_hat(system.params.coupling, system.coupling_field(terms))[0]


def _truncate_history(history, t):
    keep = sum(1 for tau in history.times if tau <= t)
    for name in ("times", "psi", "u", "rho", "source"):
        del getattr(history, name)[keep:]
    return history


class _Writer:
    def __init__(self, directory, cfg):
        self.directory = directory
        self.cfg = cfg
        if directory:
            os.makedirs(directory, exist_ok=True)
            atomic_write(os.path.join(directory, CONFIG_NAME), serialize_config(cfg))

    def path(self, name):
        return os.path.join(self.directory, name)

    def flush(self, records, state, step, history):
        if not self.directory:
            return None
        emit_diagnostics(records, self.path(CSV_NAME))
        name = checkpoint_name(step)
        write_checkpoint(state, self.cfg, self.path(name), step)
        if history is not None:
            tmp = self.path(".history-tmp.npz")
            history.save(tmp)
            os.replace(tmp, self.path(HISTORY_NAME))
        return name

    def status(self, report):
        if not self.directory:
            return
        doc = {"outcome": report.outcome.value, "t": report.t, "steps": report.steps,
               "message": report.message, "checkpoint": report.checkpoint}
        atomic_write(self.path(STATUS_NAME), json.dumps(doc, indent=2) + "\n")


def _resume(cfg, resume, directory):
    ckpt = read_checkpoint(resume)
    echo = ckpt.config
    if echo.shape != cfg.shape or echo.lengths != cfg.lengths or echo.params != cfg.params \
            or echo.truncation.cutoff != cfg.truncation.cutoff or echo.dt != cfg.dt:
        raise CheckpointError("checkpoint was written by an incompatible configuration")
    state = ckpt.state
    records = []
    if directory and os.path.exists(os.path.join(directory, CSV_NAME)):
        records = [r for r in read_diagnostics(os.path.join(directory, CSV_NAME)) if r.t <= state.t]
    history = None
    if cfg.store_history:
        path = os.path.join(directory, HISTORY_NAME) if directory else None
        if path is None or not os.path.exists(path):
            raise CheckpointError("history storage is enabled but no stored history exists to resume")
        history = _truncate_history(History.load(path), state.t)
    return state, ckpt.step, records, history


def run_simulation(cfg, output_dir=None, resume=None):
    """Advance the configured system to t_end or to the density floor.

    With no output directory (argument, config or environment) nothing is
    written and the records are only returned in the report.
    """
    cfg.validate()
    directory = resolve_output_dir(output_dir, cfg)
    trunc = cfg.truncation
    params = cfg.params
    system = GalerkinSystem(trunc, params)
    writer = _Writer(directory, cfg)

    if resume is not None:
        state, step, records, history = _resume(cfg, resume, directory)
    else:
        state = build_initial_state(cfg.initial, cfg.grid, trunc, params)
        step = 0
        records = [compute_diagnostics(state, params, trunc)]
        history = History(cfg.grid) if cfg.store_history else None
        if history is not None:
            history.append(state, _source_hat(state, system))

    nsteps = cfg.nsteps
    outcome, message = Outcome.COMPLETED, ""
    monitor = existence_monitor(state, params)
    if monitor.halted:
        outcome, message = Outcome.HALTED, f"min rho {monitor.min_rho:.6g} below floor at t={state.t:.6g}"

    while outcome is Outcome.COMPLETED and step < nsteps:
        dt = cfg.time_at(step + 1) - cfg.time_at(step)
        try:
            new = advance(state, dt, cfg, trunc, system)
        except StepperFailure as exc:
            outcome, message = Outcome.FAILED, str(exc)
            break
        step += 1
        state = new.replace(t=cfg.time_at(step))
        if history is not None:
            history.append(state, _source_hat(state, system))
        monitor = existence_monitor(state, params)
        if monitor.halted:
            outcome = Outcome.HALTED
            message = f"min rho {monitor.min_rho:.6g} below floor {params.density_floor:.6g} at t={state.t:.17g}"
        if monitor.halted or step % cfg.output_interval == 0 or step == nsteps:
            records.append(compute_diagnostics(state, params, trunc))
        if cfg.checkpoint_interval and step % cfg.checkpoint_interval == 0 and step < nsteps:
            writer.flush(records, state, step, history)

    ckpt = writer.flush(records, state, step, history)
    report = RunReport(outcome, float(state.t), step, message, records, state, history, directory, ckpt)
    writer.status(report)
    return report


@dataclass(frozen=True)
class OracleComparison:
    t: float
    max_error: float
    renormalized_residual: float


def oracle_compare(run_dir, cfg=None, dt_sub=None):
    """Characteristics density vs the stored spectral density on the grid at the final time."""
    hist_path = os.path.join(run_dir, HISTORY_NAME)
    if not os.path.exists(hist_path):
        raise ParameterError(f"{run_dir} has no {HISTORY_NAME}; rerun with history = true in [output]")
    history = History.load(hist_path)
    with open(os.path.join(run_dir, STATUS_NAME), encoding="utf-8") as fh:
        status = json.load(fh)
    ckpt = read_checkpoint(os.path.join(run_dir, status["checkpoint"]))
    if cfg is not None and (cfg.shape != ckpt.config.shape or cfg.params != ckpt.config.params):
        raise ParameterError("configuration does not match the run directory")
    grid = history.grid
    rho0 = SpectralScalarField(grid, history.rho[0], True)
    t = history.times[-1]
    values = density_oracle(rho0, history, grid.points, t, dt_sub=dt_sub)
    spectral = ckpt.state.rho.physical().reshape(-1)
    return OracleComparison(float(t), float(np.max(np.abs(values - spectral))), renormalized_check(history))
