"""Exception hierarchy shared across the package."""


class UEError(Exception):
    """Base class for all errors raised by uexpand."""


class InvalidMatrixError(UEError, ValueError):
    """A matrix is not (numerically) area preserving or has non-finite entries."""


class DirectionUndefinedError(UEError, ValueError):
    """The matrix is too close to a rotation for its contracting direction to be defined."""


class PreconditionError(UEError, ValueError):
    """Arguments fall outside the range where a bound or formula is valid."""


class SingularConfigurationError(UEError, ValueError):
    """An asymptotic formula is evaluated in its degenerate ("backtracking") regime."""


class NumericalDriftError(UEError, ArithmeticError):
    """A point has drifted off its invariant surface beyond tolerance."""


class FrameError(UEError, ArithmeticError):
    """The tangent frame is singular at a point (normal vector too small).

    ``word`` and ``step`` identify where along a composition the failure happened.
    """

    def __init__(self, message, word=None, step=None):
        super().__init__(message)
        self.word = word
        self.step = step


class ConfigError(UEError, ValueError):
    """Invalid run configuration."""
