"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 1 for bad input, 2 for
solver or convergence failures.
"""


class MigranaError(Exception):
    exit_code = 1
    stage = "migrana"


class InputError(MigranaError, ValueError):
    """Malformed or inconsistent user input."""


class ParseError(InputError):
    def __init__(self, row, column, reason):
        self.row = row
        self.column = column
        self.reason = reason
        super().__init__(f"row {row}, column {column!r}: {reason}")


class DuplicateError(InputError):
    pass


class TopologyError(InputError):
    pass


class SingularDesignError(InputError):
    def __init__(self, columns):
        self.columns = tuple(columns)
        super().__init__(
            "design matrix is rank deficient; dependent columns: " + ", ".join(self.columns)
        )


class SolveError(MigranaError, RuntimeError):
    exit_code = 2


class ConvergenceError(SolveError):
    pass
