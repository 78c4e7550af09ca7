"""Run configuration: an INI file with fixed sections and strict keys.

Sections and keys (defaults in parentheses)::

    [grid]        resolution (required; one integer per axis, or one integer
                  together with dim), dim, lengths (2 pi per axis)
    [truncation]  cutoff (min(resolution) // 6)
    [model]       coupling (1.0), interaction (1.0), viscosity (0.1),
                  density_min (0.5), density_max (2.0), density_floor (0.25)
    [initial]     kind (plane_wave), psi_amplitudes (1.0), psi_wavevectors (1,0,...),
                  velocity_amplitude (0.0), velocity_wavenumber (1), decay (6.0),
                  density (constant), density_mean (1.0), density_amplitude (0.1),
                  mollifier_width (1 / cutoff), seed (0)
    [time]        dt (required), t_end (required), stepper (rk4 | picard),
                  picard_tol (1e-10), picard_max_iter (50), max_halvings (4)
    [output]      output_interval (1 step), checkpoint_interval (0: final only),
                  directory (none), history (false)

Wavevectors are separated by semicolons, components by commas.
"""

from __future__ import annotations

import configparser
import enum
import math
import re
from dataclasses import dataclass, field, fields, replace

from .coupling import ModelParams
from .errors import ConfigParseError, ParameterError, ValidationError
from .galerkin import GalerkinTruncation, default_cutoff
from .initial_data import DensityProfile, InitialDataSpec, Kind
from .spectral import Grid


class Stepper(str, enum.Enum):
    RK4 = "rk4"
    PICARD = "picard"


@dataclass(frozen=True)
class RunConfig:
    shape: tuple
    dt: float
    t_end: float
    lengths: tuple = None
    cutoff: int = None
    params: ModelParams = field(default_factory=ModelParams)
    initial: InitialDataSpec = None
    stepper: Stepper = Stepper.RK4
    picard_tol: float = 1e-10
    picard_max_iter: int = 50
    max_halvings: int = 4
    output_interval: int = 1
    checkpoint_interval: int = 0
    output_dir: str = None
    store_history: bool = False

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        object.__setattr__(self, "shape", shape)
        lengths = (2 * math.pi,) * len(shape) if self.lengths is None else tuple(float(x) for x in self.lengths)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "stepper", Stepper(self.stepper))
        if self.initial is None:
            object.__setattr__(self, "initial", InitialDataSpec(psi_wavevectors=((1,) + (0,) * (len(shape) - 1),)))

    @property
    def seed(self):
        return self.initial.seed

    @property
    def grid(self):
        return Grid(self.shape, self.lengths)

    @property
    def truncation(self):
        grid = self.grid
        return GalerkinTruncation(grid, default_cutoff(grid) if self.cutoff is None else self.cutoff)

    @property
    def nsteps(self):
        """Number of steps; the last one is shortened if dt does not divide t_end."""
        return max(0, math.ceil(self.t_end / self.dt - 1e-9))

    def time_at(self, step):
        return min(step * self.dt, self.t_end)

    def with_(self, **changes):
        return replace(self, **changes)

    def validate(self):
        """Check every invariant; raises ValidationError naming the first violation."""
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}")
        if not self.t_end >= 0:
            raise ValidationError(f"t_end must be nonnegative, got {self.t_end}")
        if self.output_interval < 1:
            raise ValidationError(f"output_interval must be at least 1, got {self.output_interval}")
        if self.checkpoint_interval < 0:
            raise ValidationError(f"checkpoint_interval must be nonnegative, got {self.checkpoint_interval}")
        if self.max_halvings < 0:
            raise ValidationError(f"max_halvings must be nonnegative, got {self.max_halvings}")
        if self.picard_tol <= 0 or self.picard_max_iter < 1:
            raise ValidationError("picard_tol must be positive and picard_max_iter at least 1")
        try:
            self.truncation
        except ParameterError as exc:
            raise ValidationError(str(exc)) from exc
        return self


_SECTIONS = {
    "grid": {"resolution", "dim", "lengths"},
    "truncation": {"cutoff"},
    "model": {f.name for f in fields(ModelParams)},
    "initial": {f.name for f in fields(InitialDataSpec)},
    "time": {"dt", "t_end", "stepper", "picard_tol", "picard_max_iter", "max_halvings"},
    "output": {"output_interval", "checkpoint_interval", "directory", "history"},
}


def _line_numbers(text):
    """Map ``(section, key)`` to the line on which the key is set."""
    where = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        m = re.match(r"\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = lineno
            continue
        m = re.match(r"([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            where[(section, m.group(1).strip().lower())] = lineno
    return where


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _vectors(text):
    return tuple(_ints(part) for part in text.split(";") if part.strip())


def _bool(text):
    low = text.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv):
    def parse(text):
        return None if text.strip().lower() in ("", "none") else conv(text)
    return parse


_CONVERTERS = {
    ("grid", "resolution"): _ints,
    ("grid", "dim"): int,
    ("grid", "lengths"): _floats,
    ("truncation", "cutoff"): _optional(int),
    ("initial", "kind"): Kind,
    ("initial", "psi_amplitudes"): _floats,
    ("initial", "psi_wavevectors"): _vectors,
    ("initial", "velocity_wavenumber"): int,
    ("initial", "density"): DensityProfile,
    ("initial", "mollifier_width"): _optional(float),
    ("initial", "seed"): int,
    ("time", "stepper"): Stepper,
    ("time", "picard_max_iter"): int,
    ("time", "max_halvings"): int,
    ("output", "output_interval"): int,
    ("output", "checkpoint_interval"): int,
    ("output", "directory"): _optional(str),
    ("output", "history"): _bool,
}


def parse_config(text):
    """Parse and validate configuration text."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError("key outside of any section", exc.lineno) from exc
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigParseError(f"cannot parse {line.strip()!r}", lineno) from exc
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        what = f"option {exc.option!r}" if hasattr(exc, "option") else f"section [{exc.section}]"
        raise ConfigParseError(f"duplicate {what}", exc.lineno) from exc

    lines = _line_numbers(text)
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigParseError(f"unknown section [{section}]", lines.get((section, None)))
        for key, raw in parser.items(section):
            lineno = lines.get((section, key))
            if key not in _SECTIONS[section]:
                raise ConfigParseError(f"unknown key {key!r} in [{section}]", lineno)
            conv = _CONVERTERS.get((section, key), float)
            try:
                values[(section, key)] = conv(raw)
            except ValueError as exc:
                raise ConfigParseError(f"bad value for {section}.{key}: {exc}", lineno) from exc

    for required in (("grid", "resolution"), ("time", "dt"), ("time", "t_end")):
        if required not in values:
            raise ValidationError(f"missing required key {required[0]}.{required[1]}")
    return _build(values)


def _build(values):
    def section(name):
        return {k: v for (s, k), v in values.items() if s == name}

    grid = section("grid")
    shape = grid["resolution"]
    if "dim" in grid:
        if len(shape) == 1:
            shape = shape * grid["dim"]
        elif len(shape) != grid["dim"]:
            raise ValidationError(f"resolution {shape} does not match dim {grid['dim']}")
    lengths = grid.get("lengths")
    if lengths is not None and len(lengths) == 1:
        lengths = lengths * len(shape)
    try:
        Grid(shape, lengths)
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc

    try:
        params = ModelParams(**section("model"))
    except ParameterError as exc:
        raise ValidationError(str(exc)) from exc

    init = section("initial")
    init.setdefault("psi_wavevectors", ((1,) + (0,) * (len(shape) - 1),))
    initial = InitialDataSpec(**init)

    time = section("time")
    out = section("output")
    cfg = RunConfig(
        shape=shape,
        lengths=lengths,
        cutoff=section("truncation").get("cutoff"),
        params=params,
        initial=initial,
        dt=time.pop("dt"),
        t_end=time.pop("t_end"),
        output_interval=out.get("output_interval", 1),
        checkpoint_interval=out.get("checkpoint_interval", 0),
        output_dir=out.get("directory"),
        store_history=out.get("history", False),
        **time,
    )
    return cfg.validate()


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(value):
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return "none"
    return str(value)


def serialize_config(cfg):
    """Render a config as text that ``parse_config`` maps back to an equal object."""
    spec = cfg.initial
    sections = {
        "grid": {
            "resolution": ", ".join(str(n) for n in cfg.shape),
            "lengths": ", ".join(repr(x) for x in cfg.lengths),
        },
        "truncation": {"cutoff": _fmt(cfg.cutoff)},
        "model": {f.name: _fmt(getattr(cfg.params, f.name)) for f in fields(ModelParams)},
        "initial": {
            "kind": spec.kind.value,
            "psi_amplitudes": ", ".join(repr(a) for a in spec.psi_amplitudes),
            "psi_wavevectors": "; ".join(", ".join(str(n) for n in k) for k in spec.psi_wavevectors),
            "velocity_amplitude": _fmt(float(spec.velocity_amplitude)),
            "velocity_wavenumber": _fmt(spec.velocity_wavenumber),
            "decay": _fmt(float(spec.decay)),
            "density": spec.density.value,
            "density_mean": _fmt(float(spec.density_mean)),
            "density_amplitude": _fmt(float(spec.density_amplitude)),
            "mollifier_width": _fmt(spec.mollifier_width),
            "seed": _fmt(spec.seed),
        },
        "time": {
            "dt": _fmt(float(cfg.dt)),
            "t_end": _fmt(float(cfg.t_end)),
            "stepper": cfg.stepper.value,
            "picard_tol": _fmt(float(cfg.picard_tol)),
            "picard_max_iter": _fmt(cfg.picard_max_iter),
            "max_halvings": _fmt(cfg.max_halvings),
        },
        "output": {
            "output_interval": _fmt(cfg.output_interval),
            "checkpoint_interval": _fmt(cfg.checkpoint_interval),
            "directory": _fmt(cfg.output_dir),
            "history": _fmt(cfg.store_history),
        },
    }
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        lines.extend(f"{k} = {v}" for k, v in items.items())
        lines.append("")
    return "\n".join(lines)
