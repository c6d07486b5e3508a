"""Exception hierarchy shared across the package."""


class ProbSchedError(Exception):
    """Base class for all package errors."""


class MalformedLineError(ProbSchedError, ValueError):
    """An accounting line could not be parsed."""


class InvalidRecordError(ProbSchedError, ValueError):
    """A parsed record violates timestamp ordering."""


class ExcludedRecordError(ProbSchedError):
    """A record is valid but must not be used for forecasting (failed job)."""


class TraceRejectedError(ProbSchedError):
    """Too many malformed lines in a trace."""


class FitFailedError(ProbSchedError, ArithmeticError):
    """Estimation hit a singular system."""


class FitRejectedError(ProbSchedError):
    """Estimation succeeded but the parameters are unusable (non-stationary)."""


class NeedMoreDataError(ProbSchedError):
    """Not enough observations to fit the requested model."""


class SelectionFailedError(ProbSchedError):
    """No candidate order could be fitted."""


class ConfigError(ProbSchedError, ValueError):
    """Invalid pipeline configuration."""
