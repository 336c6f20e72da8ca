"""Exception taxonomy. Every error maps to one CLI exit code."""
from typing import Optional


class RembedError(Exception):
    """Base class for all library errors"""

    category = "error"
    exit_code = 1


class InvalidInputError(RembedError, ValueError):
    category = "validation"
    exit_code = 2


class DimensionError(RembedError, ValueError):
    category = "dimension"
    exit_code = 3


class ConvergenceError(RembedError, RuntimeError):
    """Iterative solver stopped without meeting its tolerance"""

    category = "convergence"
    exit_code = 4

    def __init__(self, message: str, residual: float, solution=None):
        super().__init__(message)
        self.residual = residual
        self.solution = solution


class RankError(RembedError, RuntimeError):
    """Fewer independent directions survived than the requested k"""

    category = "rank"
    exit_code = 5

    def __init__(self, message: str, achievable_k: int):
        super().__init__(message)
        self.achievable_k = achievable_k


class OracleRefusedError(RembedError, RuntimeError):
    category = "oracle"
    exit_code = 6


class ParseError(RembedError, ValueError):
    category = "parse"
    exit_code = 7

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class FormatError(RembedError, ValueError):
    category = "format"
    exit_code = 8


class IndexOutOfRangeError(RembedError, IndexError):
    category = "index"
    exit_code = 9
