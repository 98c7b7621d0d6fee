import logging
from typing import Any, Callable, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)


class QuadvaneError(Exception):
    """Base exception for the quadvane package."""
    pass


class DomainError(QuadvaneError, ValueError):
    """Exception raised when an input lies outside an operation's domain."""
    pass


class IndeterminateDirectionError(DomainError):
    """Exception raised when opposite-beam differences are too small to decode a direction."""

    def __init__(self, magnitude: float, threshold: float):
        self.magnitude = magnitude
        self.threshold = threshold
        super().__init__(
            f"indeterminate direction: quadrature magnitude {magnitude:.3e} ohm "
            f"below threshold {threshold:.3e} ohm"
        )


class ConfigParseError(QuadvaneError):
    """Exception raised for syntax errors, unknown keys or missing keys in a config file."""

    def __init__(self, message: str, line_number: Optional[int] = None, key: Optional[str] = None):
        self.line_number = line_number
        self.key = key
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{prefix}{message}")


class ConfigValidationError(QuadvaneError):
    """Exception raised when a parsed config breaks one or more invariants."""

    def __init__(self, violations: Sequence[str]):
        self.violations: List[str] = list(violations)
        super().__init__("invalid sensor config: " + "; ".join(self.violations))


class FitError(QuadvaneError):
    """Exception raised when a lobe fit cannot be identified from the data."""
    pass


class ModelViolationError(QuadvaneError):
    """Exception raised when the forward model breaks one of its own contracts."""
    pass


class SchemaError(QuadvaneError):
    """Exception raised for CSV header or row problems."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column '{column}'")
        prefix = (", ".join(where) + ": ") if where else ""
        super().__init__(f"{prefix}{message}")


class InputFileError(QuadvaneError):
    """Exception raised when a CLI path cannot be read or written."""
    pass


def safe_call(
    func: Callable,
    error_message: str = "Call failed",
    *args: Any,
    **kwargs: Any
) -> Tuple[bool, Any, Optional[Exception]]:
    """
    Safely execute a callable and capture any exception.

    Args:
        func: The function to call
        error_message: Message to log on error

    Returns:
        Tuple of (success: bool, result: Any, exception: Optional[Exception])
    """
    try:
        return True, func(*args, **kwargs), None
    except Exception as e:
        logger.error(f"{error_message}: {type(e).__name__}: {e}")
        return False, None, e
