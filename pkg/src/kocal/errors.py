"""Exception hierarchy shared across the package."""


class KocalError(Exception):
    """Base class for all package errors."""


class InputError(KocalError, ValueError):
    """Malformed or non-finite input (bad shapes, NaNs, invalid parameters)."""


class TheoryDomainError(KocalError, ValueError):
    """A rate or bound routine was called outside its validity range (smoothness < 1)."""


class ConditioningError(KocalError, ArithmeticError):
    """Cholesky factorization failed.

    ``pivot`` is the offending (non-positive) pivot and ``order`` the
    1-based index at which the factorization broke down.
    """

    def __init__(self, message, pivot=None, order=None, jitter=None):
        super().__init__(message)
        self.pivot = pivot
        self.order = order
        self.jitter = jitter


class CalibrationError(KocalError, RuntimeError):
    """Every model evaluation in a calibration search failed."""


class SimulatorError(KocalError, RuntimeError):
    """The external simulator misbehaved (bad line, ERR reply, early exit)."""


class ConfigError(KocalError, ValueError):
    """Invalid run configuration."""


class DataError(KocalError, ValueError):
    """A data, query or fit file is missing, unreadable or has the wrong columns."""


class SlopeFitError(KocalError, ArithmeticError):
    """Too few usable points to fit a log-log slope."""


# errors that the CLI reports as numerical failures
NUMERICAL_ERRORS = (ConditioningError, CalibrationError, SimulatorError, SlopeFitError)
