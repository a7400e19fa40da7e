"""Exception hierarchy shared across the package."""


class SrLassoError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficient(SrLassoError):
    """A matrix that must have full column rank does not."""


class InRange(SrLassoError):
    """A vector that must lie outside the range of a matrix lies in it."""


class IllConditioned(SrLassoError):
    """A computed inverse fails its own residual check."""


class ZeroResidual(SrLassoError):
    """The residual ``b - Ax`` is numerically zero, so it cannot be normalized."""


class DualInfeasible(SrLassoError):
    """A proposed dual vector violates the dual constraints."""


class NotConverged(SrLassoError):
    """An iterative method stopped at its iteration cap.

    The best iterate found is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TooLarge(SrLassoError):
    """Problem is too large for exhaustive enumeration."""


class IntermediateFails(SrLassoError):
    """The intermediate regularity condition does not hold at the point."""


class StrongFails(SrLassoError):
    """The strong regularity condition does not hold at the point."""


class Degenerate(SrLassoError):
    """No active set validates for a directional derivative."""


class Indeterminate(SrLassoError):
    """A regularity flag could not be decided (zero residual)."""


class InvalidConfig(SrLassoError):
    """An experiment configuration is malformed."""
