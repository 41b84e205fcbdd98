"""Exception hierarchy.

Exceptions derive from :class:`PreconditionError` when a mathematical
hypothesis (curvature bound, length window, conjugate point) fails, and
from :class:`InvalidParams` when the caller supplied inconsistent input.
The CLI maps the first family to exit code 2 and the second to exit code 1.
"""


class RootRicciError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParams(RootRicciError, ValueError):
    pass


class ConfigError(InvalidParams):
    pass


class DimensionMismatch(InvalidParams):
    pass


class GridMismatch(InvalidParams):
    pass


class StepCountTooSmall(InvalidParams):
    pass


class NotHomogeneous(InvalidParams):
    pass


class PreconditionError(RootRicciError):
    """A geometric hypothesis required by the computation does not hold."""


class NotPositiveSemidefinite(PreconditionError, ValueError):
    pass


class PositiveCurvature(PreconditionError):
    pass


class SingularAtEndpoint(PreconditionError):
    pass


class ConjugateReached(PreconditionError):
    pass


class ConjugateBeforeR(PreconditionError):
    """Raised when a conjugate point precedes the requested radius.

    The partially filled :class:`~rootricci.candle.CandleReport` is attached
    as ``report`` so callers can still print the conjugate location.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SingularY(PreconditionError):
    pass


class OutOfWindow(PreconditionError):
    pass


class WindowViolated(PreconditionError):
    pass


class NoConvergence(RootRicciError):
    pass


class FitFailure(RootRicciError):
    pass
