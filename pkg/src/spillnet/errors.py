"""Exception hierarchy.

Data problems (bad input files, too little data, degenerate series) and
numerical problems (non-convergence, ill-conditioning) are kept apart so the
command line can map them to distinct exit codes.
"""


class SpillnetError(Exception):
    """Base class for all package errors."""


class DataError(SpillnetError, ValueError):
    """Input data cannot be used as given."""


class PanelParseError(DataError):
    """A panel CSV is malformed.

    Attributes:
        row: 1-based line number in the file, or None.
        column: column header, or None.
    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class InsufficientDataError(DataError):
    """Too few observations for the requested estimate."""


class DegenerateSeriesError(DataError):
    """The series has no variation (constant), so the estimate is undefined."""


class NumericalError(SpillnetError, ArithmeticError):
    """An iterative or linear-algebra routine failed."""


class ConvergenceError(NumericalError):
    """Iteration did not converge; ``last`` holds the final iterate."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class ConditioningError(NumericalError):
    """A linear system is too ill-conditioned to solve reliably."""
