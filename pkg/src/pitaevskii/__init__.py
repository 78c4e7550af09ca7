"""Pseudo-spectral semi-Galerkin solver for the Pitaevskii two-fluid model.

A nonlinear Schroedinger equation for the superfluid wavefunction is coupled
to the inhomogeneous incompressible Navier-Stokes equations for the normal
fluid on a periodic box.
"""

from .config import RunConfig, Stepper, load_config, parse_config, serialize_config
from .coupling import ModelParams, apply_B, apply_BL, coupling_source, momentum_source
from .diagnostics import (
    DiagnosticsRecord,
    circulation,
    compute_diagnostics,
    existence_monitor,
    gronwall_monitor,
    madelung,
)
from .errors import (
    CheckpointError,
    ConfigParseError,
    ContractionError,
    DensityFloorError,
    DimensionError,
    ParameterError,
    PitaevskiiError,
    TemporalCoverageError,
    ValidationError,
)
from .galerkin import GalerkinTruncation, SimState, picard_step, rk4_step, truncate_state
from .initial_data import DensityProfile, InitialDataSpec, Kind, build_initial_state
from .persistence import emit_diagnostics, read_checkpoint, read_diagnostics, write_checkpoint
from .runner import Outcome, RunReport, oracle_compare, run_simulation
from .spectral import Grid, SpectralScalarField, VelocityField
from .transport import History, density_oracle, renormalized_check, trace_characteristics

__version__ = "0.1.0"
