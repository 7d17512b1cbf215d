"""Exception hierarchy shared across the package."""


class DdjumpError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DdjumpError):
    """Malformed model configuration text.

    Carries a 1-based ``line`` (and ``col`` where meaningful) pointing at the
    offending location.
    """

    def __init__(self, message, line=None, col=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {col}" if col is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.col = col


class ExprSyntaxError(ConfigError):
    """Syntax error inside a rate expression."""


class UnknownParameterError(ConfigError):
    """A rate expression references a name that is neither a variable nor a bound parameter."""


class DimensionMismatchError(ConfigError):
    """A jump vector or variable index disagrees with the model dimension."""


class DomainError(DdjumpError):
    """A point lies outside the model's state-space domain."""


class RateError(DdjumpError):
    """A rate evaluated to a negative or non-finite value."""


class CertificateError(DdjumpError):
    """The stability certificate cannot be constructed (assumption violated)."""


class ConvergenceError(DdjumpError):
    """An iterative solver failed to converge."""


class NotSpanningError(DdjumpError):
    """A decomposition was requested for a jump set that is not spanning."""


class InconclusiveError(DdjumpError):
    """Lattice classification exhausted its search budget without a witness."""


class CapExceededError(DdjumpError):
    """A state-space enumeration would exceed the configured cap."""


class HorizonError(DdjumpError):
    """A time horizon was exhausted before the sought event occurred."""


class SimulationError(DdjumpError):
    """The stochastic simulation hit an invalid model/state combination."""
