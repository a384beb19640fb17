"""Exception hierarchy for kinkreg."""


class KinkRegError(Exception):
    """Base class for all kinkreg errors."""


class InvalidConfigError(KinkRegError, ValueError):
    """A parameter or configuration value is outside its admissible range."""


class EmptyGridError(KinkRegError):
    """No threshold candidate survives trimming and the regime-count filter."""


class SingularDesignError(KinkRegError):
    """The regression design is rank deficient beyond tolerance."""


class DegenerateFitError(KinkRegError):
    """The unconstrained fit is perfect (zero residual variance), so the
    continuity statistic is undefined."""


class ParseError(KinkRegError):
    """A cell of an input file could not be parsed as a number."""

    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        super().__init__(message)
        self.row = row
        self.column = column


class SchemaError(KinkRegError):
    """An input file is missing a required column."""
