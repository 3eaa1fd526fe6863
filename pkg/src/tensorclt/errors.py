"""Exception hierarchy.

Every error carries a short machine-readable ``code`` (``E_DIM``, ``E_RANGE``,
...) so that the CLI and JSON reports can surface it verbatim.
"""

from __future__ import annotations


class TensorCLTError(Exception):
    code = "E_GENERIC"

    def __init__(self, message: str = "", **context):
        super().__init__(message)
        self.context = context

    def __str__(self) -> str:
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code


class DimensionError(TensorCLTError, ValueError):
    code = "E_DIM"


class RangeError(TensorCLTError, ValueError):
    code = "E_RANGE"


class ScaleError(TensorCLTError, ValueError):
    """An exhaustive enumeration would exceed the configured budget."""

    code = "E_SCALE"


class NotSymmetricError(TensorCLTError, ValueError):
    code = "E_NOT_SYMMETRIC"


class DiagonalError(TensorCLTError, ValueError):
    code = "E_DIAGONAL"


class PermutationError(TensorCLTError, ValueError):
    code = "E_PERM"


class NotHoeffdingError(TensorCLTError, ValueError):
    code = "E_NOT_HOEFFDING"


class NotNormalizedError(TensorCLTError, ValueError):
    code = "E_NOT_NORMALIZED"


class SpecError(TensorCLTError, ValueError):
    code = "E_SPEC"


class SmallNError(TensorCLTError, ValueError):
    code = "E_SMALL_N"


class DegenerateError(TensorCLTError, ValueError):
    code = "E_DEGENERATE"


class MissingMomentError(TensorCLTError, ValueError):
    code = "E_MISSING_MOMENT"


class OverflowRangeError(TensorCLTError, OverflowError):
    code = "E_OVERFLOW"


class EmptyError(TensorCLTError, ValueError):
    code = "E_EMPTY"


class ParseError(TensorCLTError, ValueError):
    code = "E_PARSE"

    def __init__(self, message: str = "", line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message, line=line, column=column)
        self.line = line
        self.column = column


class InputOutputError(TensorCLTError, OSError):
    code = "E_IO"
