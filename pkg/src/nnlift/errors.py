"""
Exception hierarchy for the NN-LIFT library.

Each numerical stage raises a specific subclass; the CLI maps stage failures
to exit codes through StageError.
"""
from typing import Optional

from .config import EXIT_CODES


class NNLiftError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(NNLiftError, ValueError):
    """Shapes, ranges or options that violate an operation's contract."""


class ConfigurationError(NNLiftError):
    """A density or run configuration cannot support the requested operation."""


class StateError(NNLiftError):
    """An object is used before it holds the data the operation needs."""


class IllConditionedMomentError(NNLiftError):
    """The second-order moment is too close to rank deficient for whitening."""

    def __init__(self, message: str, eigenvalue: Optional[float] = None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class DegenerateIterateError(NNLiftError):
    """A power iterate collapsed to (numerically) zero."""


class DegenerateCoefficientError(NNLiftError):
    """A recovered moment coefficient is too small to un-whiten."""


class DegenerateDimensionError(NNLiftError):
    """The operation is undefined in the given dimension."""


class InsufficientDataError(NNLiftError):
    """No samples survive filtering."""


class SingularDesignError(NNLiftError):
    """The regression design matrix is singular at the requested lambda."""


class DatasetFormatError(NNLiftError):
    """A dataset file does not match the expected layout."""


class StageError(NNLiftError):
    """Wraps a failure of one training stage with its label and exit code."""

    def __init__(self, stage: str, cause: Exception, component: Optional[int] = None):
        self.stage = stage
        self.cause = cause
        self.component = component
        self.exit_code = EXIT_CODES.get(stage, 1)
        where = f" (component {component})" if component is not None else ""
        super().__init__(f"{stage} stage failed{where}: {cause}")
