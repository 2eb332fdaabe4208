"""Exception and warning types raised across the package."""


class JIMError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(JIMError, ValueError):
    """An argument lies outside the domain of a model function."""


class InvalidParameterError(DomainError):
    """A parameter set violates the model constraints."""


class DegenerateImpactError(InvalidParameterError):
    """Impact offset and slope are both zero, so the impact is 0/0."""


class UnsortedSequenceError(DomainError):
    """Point times are not strictly increasing or leave the window."""


class StabilityError(JIMError):
    """The excitation matrix has spectral radius >= 1."""


class ConvergenceError(JIMError, ArithmeticError):
    """An iterative routine failed to converge."""


class InsufficientDataError(JIMError, ValueError):
    """Not enough observations to estimate the requested quantity."""


class DegenerateDataError(InsufficientDataError):
    """The data carry no temporal information (e.g. a single time)."""


class EmptyResultError(JIMError):
    """A filtering step removed every record."""


class ConfigError(JIMError, ValueError):
    """Inconsistent configuration values."""


class CapExceededError(JIMError, RuntimeError):
    """A simulation hit its point-count safety cap."""


class NumericalWarning(RuntimeWarning):
    """Emitted when a likelihood term is non-positive and -inf is returned."""
