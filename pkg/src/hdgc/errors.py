"""Exception hierarchy shared across the package."""
from __future__ import annotations


class HdgcError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 2


class InvalidInputError(HdgcError, ValueError):
    """Input data is malformed or contains non-finite values."""


class InvalidParameterError(HdgcError, ValueError):
    """A tuning parameter or configuration value is out of range."""

    exit_code = 1


class ContractViolationError(HdgcError):
    """A structural precondition (e.g. Hermitian symmetry) does not hold."""


class DimensionMismatchError(HdgcError, ValueError):
    pass


class SingularDesignError(HdgcError, ValueError):
    """Design matrix is rank deficient.

    ``dependent_columns`` lists the column indices found to be linearly
    dependent on the others.
    """

    def __init__(self, message: str, dependent_columns: tuple[int, ...] = ()):
        super().__init__(message)
        self.dependent_columns = tuple(dependent_columns)


class DegenerateInputError(HdgcError, ValueError):
    pass


class DegenerateFitError(HdgcError, ValueError):
    pass


class FormatError(InvalidInputError):
    """A file could not be parsed; message carries the location."""


class InvalidSpecError(HdgcError, ValueError):
    pass


class StageError(HdgcError):
    """Wraps a module error with the pipeline stage in which it occurred."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2)


class OutputError(HdgcError, OSError):
    """A file could not be read or written."""

    exit_code = 3
