"""Exception hierarchy shared across the package."""


class SelectRandError(Exception):
    """Base class for all package errors."""


class InvalidInputError(SelectRandError, ValueError):
    pass


class UnsupportedOperationError(SelectRandError):
    pass


class SelectionViolatedError(SelectRandError):
    """The data do not satisfy the selection event they are claimed to."""


class NumericalFailureError(SelectRandError):
    def __init__(self, message, achieved_tol=None):
        super().__init__(message)
        self.achieved_tol = achieved_tol


class DegenerateContrastError(SelectRandError):
    pass


class SelectionProbabilityUnderflowError(NumericalFailureError):
    pass


class DegenerateDensityError(SelectRandError):
    pass


class DegenerateFitError(SelectRandError):
    """Residual collapsed to zero where a non-zero residual is required."""


class ConvergenceError(NumericalFailureError):
    def __init__(self, message, achieved_gap=None):
        super().__init__(message, achieved_tol=achieved_gap)
        self.achieved_gap = achieved_gap


class RankError(SelectRandError):
    pass


class SeparationError(SelectRandError):
    pass


class InfeasibleStartError(SelectRandError):
    pass


class InsufficientSamplesError(SelectRandError):
    pass


class BracketError(SelectRandError):
    pass


class InvariantViolationError(SelectRandError):
    pass
