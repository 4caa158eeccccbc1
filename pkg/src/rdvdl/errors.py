"""Exception and warning types shared across the package."""


class RdvdlError(Exception):
    """Base class for all package errors."""


class CsvParseError(RdvdlError):
    """Raised when a CSV file cannot be parsed into a dataset.

    Carries 1-based ``row`` and ``col`` coordinates when they are known.
    """

    def __init__(self, message, row=None, col=None):
        self.row = row
        self.col = col
        super().__init__(message)


class InsufficientDataError(RdvdlError):
    """Raised when an operation needs more samples than were provided."""


class NumericalError(RdvdlError):
    """Raised when a numerical routine fails or produces non-finite output."""


class DegenerateDistributionError(RdvdlError):
    """Raised when a statistic sample is too degenerate to set a control limit."""


class ConstantColumnWarning(UserWarning):
    """Emitted when a column has (near-)zero spread and is scaled by 1."""


class ConvergenceWarning(UserWarning):
    """Emitted when an iterative fit stops before reaching its tolerance."""
