"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError exits 2, everything
else derived from QcheckError exits 1.
"""


class QcheckError(Exception):
    """Base class for all package errors."""


class ConfigError(QcheckError):
    """Invalid configuration: unknown column, bad flag combination, malformed model file."""


class DataError(QcheckError):
    """Data violates an invariant: too few rows, non-finite values, degenerate columns."""


class ParseError(DataError):
    """A CSV cell failed to parse; carries 1-based row/column coordinates."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class FitError(QcheckError):
    """Quantile regression fit cannot proceed (rank deficiency, n <= p)."""


class DegenerateVarianceError(QcheckError):
    """All pairwise kernel weights vanished; the studentized statistic is undefined."""


class InternalError(QcheckError):
    """An internal guard tripped (should not happen on valid input)."""
