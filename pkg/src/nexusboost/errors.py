"""Exception hierarchy.

Validation errors (bad input files, bad configuration) map to CLI exit code 2;
everything else raised while modelling maps to exit code 3.
"""


class NexusError(Exception):
    """Base class for all package errors."""


class ValidationError(NexusError, ValueError):
    """Input data or configuration failed validation."""


class SchemaError(ValidationError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"missing required column {column!r}")


class RowValidationError(ValidationError):
    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class DuplicateKeyError(ValidationError):
    pass


class GapError(ValidationError):
    def __init__(self, start, end, length):
        self.start, self.end, self.length = start, end, length
        super().__init__(f"timeline gap of {length} month(s) from {start} to {end}")


class DegenerateColumnError(ValidationError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column!r} has zero variance")


class ConfigurationError(ValidationError):
    pass


class ShapeError(NexusError, ValueError):
    pass


class EmptyDataError(NexusError, ValueError):
    pass


class InsufficientDataError(NexusError, ValueError):
    pass


class ComparabilityError(NexusError, ValueError):
    pass
