"""Exception hierarchy shared by the solver modules."""


class PitaevskiiError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PitaevskiiError, ValueError):
    """Array shapes or grids do not match."""


class ParameterError(PitaevskiiError, ValueError):
    """A numerical parameter is outside its admissible range."""


class DensityFloorError(PitaevskiiError):
    """The normal-fluid density dropped below the floor epsilon."""

    def __init__(self, min_rho, floor, t=None):
        self.min_rho = float(min_rho)
        self.floor = float(floor)
        self.t = t
        where = "" if t is None else f" at t={t:.6g}"
        super().__init__(
            f"density floor violated{where}: min rho = {self.min_rho:.6g} < epsilon = {self.floor:.6g}"
        )


class ContractionError(PitaevskiiError):
    """Picard iteration failed to converge within the iteration budget."""


class TemporalCoverageError(PitaevskiiError, ValueError):
    """A stored history does not cover the requested time interval."""


class ValidationError(PitaevskiiError, ValueError):
    """A configuration or initial-data invariant is violated."""


class ConfigParseError(PitaevskiiError, ValueError):
    """A configuration file could not be parsed."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class CheckpointError(PitaevskiiError):
    """A checkpoint file is corrupt, truncated or of an unknown version."""
