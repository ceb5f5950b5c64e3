"""
Error Utilities

Exception hierarchy for model, planner and CLI failures, plus heuristic
classification of exceptions into exit-code categories.
"""

import json
import logging
from typing import Any, List, Optional, Sequence

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_INVALID_INPUT = 2
EXIT_IO_FAILURE = 3


class MpomdpError(Exception):
    """Base class for all errors raised by this package."""


class InvalidConfig(MpomdpError, ValueError):
    """A model, scenario or command-line configuration is unusable."""


class ModelValidationError(InvalidConfig):
    """Raised by loaders when validate_model reports violations."""

    def __init__(self, violations: Sequence[str]):
        self.violations: List[str] = list(violations)
        preview = "; ".join(self.violations[:3])
        more = f" (+{len(self.violations) - 3} more)" if len(self.violations) > 3 else ""
        super().__init__(f"Model has {len(self.violations)} violation(s): {preview}{more}")


class MalformedTrace(InvalidConfig):
    """A trace file is empty or its records cannot be interpreted."""


class ImpossibleObservation(MpomdpError):
    """The observation has zero likelihood under the previous belief and action."""

    def __init__(self, likelihood: float, detail: str = ""):
        self.likelihood = likelihood
        message = f"Observation has likelihood {likelihood:.3e}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class ImpossibleObservationForAll(MpomdpError):
    """Every candidate joint action gives the received observation zero likelihood."""


class NoSafeAction(MpomdpError):
    """No candidate joint action satisfies the barrier condition."""

    def __init__(self, message: str, candidates: Optional[Sequence[Any]] = None):
        self.candidates = tuple(candidates or ())
        super().__init__(message)


def is_io_error(exc: Exception) -> bool:
    """
    Heuristic to detect filesystem failures.

    Args:
        exc: Exception to check

    Returns:
        True if the exception comes from reading or writing files
    """
    if isinstance(exc, (FileNotFoundError, PermissionError, IsADirectoryError)):
        return True
    if isinstance(exc, OSError):
        return True
    msg = str(exc).lower()
    return "no such file or directory" in msg or "permission denied" in msg


def is_invalid_input_error(exc: Exception) -> bool:
    """
    Heuristic to detect malformed user input (configs, traces, flags).

    Args:
        exc: Exception to check

    Returns:
        True if the exception indicates invalid input rather than a runtime failure
    """
    if isinstance(exc, (InvalidConfig, json.JSONDecodeError, KeyError, TypeError)):
        return True
    if isinstance(exc, ValueError):
        return True
    msg = str(exc).lower()
    return "missing required field" in msg or "invalid" in msg


def classify_error(exc: Exception) -> str:
    """
    Classify an exception into a known error category.

    Args:
        exc: Exception to classify

    Returns:
        Error category string:
        - "SAFETY_DEADLOCK": no safe joint action existed
        - "IMPOSSIBLE_OBSERVATION": observation inconsistent with the model
        - "INVALID_INPUT": model, scenario, trace or flag problem
        - "IO_FAILURE": file could not be read or written
        - "UNKNOWN": anything else
    """
    if isinstance(exc, NoSafeAction):
        return "SAFETY_DEADLOCK"
    if isinstance(exc, (ImpossibleObservation, ImpossibleObservationForAll)):
        return "IMPOSSIBLE_OBSERVATION"
    # FileNotFoundError for a missing config is an I/O problem, not a bad value
    if is_io_error(exc):
        return "IO_FAILURE"
    if is_invalid_input_error(exc):
        return "INVALID_INPUT"
    return "UNKNOWN"


_EXIT_CODES = {
    "INVALID_INPUT": EXIT_INVALID_INPUT,
    "IO_FAILURE": EXIT_IO_FAILURE,
}


def exit_code_for(exc: Exception) -> int:
    """Map an exception to the CLI exit code of its category."""
    return _EXIT_CODES.get(classify_error(exc), EXIT_VIOLATIONS)
