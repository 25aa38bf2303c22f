"""Exception hierarchy shared by the library and the command-line front end."""


class KTubeError(Exception):
    """Base class for all errors raised by this package."""


class TableError(KTubeError, ValueError):
    """Malformed or invalid contingency-table input.

    ``row`` and ``column`` are 1-based positions in the source file when the
    problem can be located there.
    """

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class DimensionMismatchError(KTubeError, ValueError):
    """Two probability vectors (or a vector and a model) disagree on shape."""


class ModelSpecError(KTubeError, ValueError):
    """Invalid model specification."""


class InfiniteDistanceError(KTubeError, ArithmeticError):
    """A distance is infinite because of a support violation."""


class DomainError(KTubeError, ValueError):
    """An argument lies outside the domain of a kernel."""


class ConvergenceError(KTubeError, RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, discrepancy=None):
        if discrepancy is not None:
            message = f"{message} (final discrepancy {discrepancy:.3e})"
        super().__init__(message)
        self.discrepancy = discrepancy


class InvariantError(KTubeError, AssertionError):
    """An internal consistency check failed."""
