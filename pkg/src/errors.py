from typing import Optional


class PwlrError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PwlrError, ValueError):
    pass


class ParseError(PwlrError, ValueError):
    """
    Raised when a dataset file holds a malformed line.

    Args:
        - path (str): file that failed to parse
        - line (int): 1-indexed line number of the offending row
        - reason (str): what was wrong with the row
    """

    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        self.reason = reason
        super().__init__(f"{path}:{line}: {reason}")


class DegenerateLabelError(PwlrError, ValueError):
    pass


class VocabularyError(PwlrError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


class DisconnectedGraphError(ValidationError):
    pass


class ConvergenceError(PwlrError, ArithmeticError):
    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        super().__init__(message)


class StratificationError(PwlrError, ValueError):
    pass
