"""Exception hierarchy.

Each top-level family maps to one CLI exit code (see ``wavevol.cli``).
"""


class WavevolError(Exception):
    """Base class for all package errors."""


class ConfigError(WavevolError):
    """Invalid configuration or arguments."""


class DataError(WavevolError):
    """Input data that cannot be processed."""


class FormatError(DataError):
    """Malformed tick or table file."""


class InsufficientDataError(DataError):
    """Too few observations for the requested computation."""


class DegenerateSessionError(DataError):
    """A session with fewer than two usable grid points."""


class AlignmentError(DataError):
    """Series that should share a sample range do not."""


class NumericError(WavevolError):
    """Overflow, invalid domain or a singular problem."""


class LevelDepthError(NumericError):
    """Requested wavelet depth is too deep for the sample length."""


class BandwidthError(NumericError):
    """Kernel bandwidth not smaller than the number of returns."""


class SingularFitError(NumericError):
    """Data carry no information for the model (e.g. constant returns)."""


class ConvergenceError(NumericError):
    """Optimizer failed; ``best`` holds the best parameter vector found."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
