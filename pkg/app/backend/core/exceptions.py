"""
Error types shared by the library and the CLI.

Each error carries a machine-readable ``code`` and the process exit code the
CLI uses when the error escapes a subcommand.
"""

from typing import Any

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_METHOD_FAILURE = 2
EXIT_DATA_ERROR = 3


class PermTestError(Exception):
    code: str = "error"
    exit_code: int = EXIT_USAGE

    def __init__(self, message: str, detail: dict[str, Any] | None = None):
        super().__init__(message)
        self.message = message
        self.detail = detail or {}


class InvalidInput(PermTestError):
    code = "invalid-input"
    exit_code = EXIT_USAGE


class DataError(PermTestError):
    code = "bad-csv"
    exit_code = EXIT_DATA_ERROR


class BadColumn(DataError):
    code = "bad-column"

    def __init__(self, column: str, available: list[str]):
        super().__init__(
            f"Column '{column}' not found",
            {"column": column, "available": available},
        )


class GroupError(PermTestError):
    code = "invalid-group-file"
    exit_code = EXIT_DATA_ERROR


class ClosureViolation(GroupError):
    """Composition of elements ``i`` and ``j`` (0-based) is not in the group."""

    code = "closure-violation"

    def __init__(self, i: int, j: int):
        self.i = i
        self.j = j
        # reported 1-based like every other external index
        super().__init__(
            f"Composition of elements {i + 1} and {j + 1} is not in the group",
            {"pair": [i + 1, j + 1]},
        )


class DuplicateElement(GroupError):
    code = "duplicate-element"

    def __init__(self, first: int, second: int):
        super().__init__(
            f"Elements {first + 1} and {second + 1} are the same permutation",
            {"pair": [first + 1, second + 1]},
        )


class TooLarge(GroupError):
    code = "too-large"


class NoSolution(PermTestError):
    code = "no-solution"
    exit_code = EXIT_METHOD_FAILURE


class DegenerateResidual(PermTestError):
    code = "x-in-span-z"
    exit_code = EXIT_METHOD_FAILURE
