"""Exception hierarchy shared across the package."""


class LobnoiseError(Exception):
    """Base class for all package errors."""


class InsufficientData(LobnoiseError):
    """Fewer observations than an operation requires."""


class MissingCovariate(LobnoiseError):
    """A noise model needs a limit-order-book variable the series lacks."""


class OutOfBounds(LobnoiseError):
    """A parameter vector lies outside its admissible box."""


class IndefiniteKernel(LobnoiseError):
    """The MA(1) return covariance matrix is not positive definite."""


class NoConvergence(LobnoiseError):
    """Optimizer exhausted its budget; carries the best iterate found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class BoundarySolution(LobnoiseError):
    """Every coordinate of the fitted parameter is pinned to its bound."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class WindowTooLarge(LobnoiseError):
    """A local spot-variance window does not fit inside the sample."""


class DegenerateVariance(LobnoiseError):
    """A variance estimate is non-positive where positivity is required."""


class Undefined(LobnoiseError):
    """A ratio or statistic has a degenerate (zero) denominator."""


class ParseError(LobnoiseError):
    """A data file row could not be parsed; carries the 1-based line number."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class EmptyFile(LobnoiseError):
    """The input file contains no parseable observations."""


class StudyDegenerate(LobnoiseError):
    """Too many replications of a Monte Carlo cell failed to fit."""


class GridNotRegular(UserWarning):
    """Warning: a regular-grid statistic was requested on irregular times."""
