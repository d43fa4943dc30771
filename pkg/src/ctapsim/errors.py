"""Exception hierarchy shared by the simulator modules."""


class CtapError(Exception):
    """Base class for simulator errors."""


class ChainValidationError(CtapError, ValueError):
    """Invalid chain description."""


class LengthMismatchError(ChainValidationError):
    pass


class TooFewSitesError(ChainValidationError):
    pass


class NegativeAmplitudeError(ChainValidationError):
    pass


class ScheduleError(CtapError, ValueError):
    """Invalid pulse or schedule parameters, or sampling outside [0, t_max]."""


class DegenerateSpectrumError(CtapError):
    """The dark state cannot be singled out because its eigenvalue is (near) degenerate."""


class InvariantViolation(CtapError):
    """A density-matrix invariant broke during integration.

    ``time`` is the simulation time (ns) of the first offending sample, if known.
    """

    def __init__(self, message: str, time: float | None = None):
        if time is not None:
            message = f"{message} (t={time:.6g} ns)"
        super().__init__(message)
        self.time = time


class ConfigError(CtapError, ValueError):
    """Malformed or inconsistent experiment configuration."""
