"""
Error hierarchy. Every error carries the process exit code the CLI returns for it:
0 success, 1 usage, 2 input format, 3 numeric or convergence failure.
"""
from typing import Optional


class TieInferenceError(Exception):
    """Base class for all expected failures."""
    exit_code = 1

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self) -> str:
        return self.message


class UsageError(TieInferenceError):
    exit_code = 1


class ParameterError(TieInferenceError, ValueError):
    """An argument outside its documented range (tau_max < 1, folds < 2, ...)."""
    exit_code = 1


class InputFormatError(TieInferenceError):
    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None, **context):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}", path=path, line=line, **context)


class UnknownPlayerError(TieInferenceError, KeyError):
    exit_code = 2

    def __init__(self, player: int):
        self.player = player
        super().__init__(f"unknown player {player}", player=player)


class NumericError(TieInferenceError):
    exit_code = 3


class ConvergenceError(NumericError):
    exit_code = 3


class DegenerateDataError(TieInferenceError):
    """Input that admits no answer: a single class, no candidate threshold, ..."""
    exit_code = 3
