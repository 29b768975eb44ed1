"""
Utils Module
Logging setup, progress tracking, typed errors and small numeric helpers
"""

import os
import math
import logging
import datetime
from typing import Any, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)

UNBOUNDED = float("inf")


class MetricSpaceError(Exception):
    """Base class for every error raised by the toolkit"""


class SpaceValidationError(MetricSpaceError):
    """A space violates one of the core invariants"""

    def __init__(self, invariant: str, message: str):
        self.invariant = invariant
        super().__init__(f"invariant '{invariant}' violated: {message}")


class SpaceFileError(MetricSpaceError):
    """Malformed space file"""

    def __init__(self, field: str, message: str, line: Optional[int] = None):
        self.field = field
        self.line = line
        where = f"line {line}, field '{field}'" if line is not None else f"field '{field}'"
        super().__init__(f"{where}: {message}")


class InvalidPointError(MetricSpaceError):
    pass


class NotApWeightError(MetricSpaceError):
    pass


class NotDoublingError(MetricSpaceError):
    """ν is not doubling; carries the (center, radius) witness"""

    def __init__(self, witness: Tuple[int, float]):
        self.witness = witness
        super().__init__(
            f"weighted measure is not doubling (witness center={witness[0]}, radius={witness[1]!r})"
        )


class DegenerateImageError(MetricSpaceError):
    def __init__(self, point: int, message: str = "map collapses the ball to a null set"):
        self.point = point
        super().__init__(f"degenerate image at point {point}: {message}")


class SolverError(MetricSpaceError):
    """Modulus solver failed; carries the current bracket"""

    def __init__(self, message: str, lower: float = 0.0, upper: float = UNBOUNDED):
        self.lower = lower
        self.upper = upper
        super().__init__(f"{message} (lower bound {lower!r}, upper bound {upper!r})")


class BallTooLargeError(MetricSpaceError):
    def __init__(self, message: str = "ball too large"):
        super().__init__(message)


class InvalidPathError(MetricSpaceError):
    """A curve is not a path along skeleton edges"""


class ConfigError(MetricSpaceError):
    pass


INPUT_ERRORS = (SpaceValidationError, SpaceFileError, InvalidPointError, InvalidPathError, ConfigError, OSError)


class ProgressTracker:
    """Theo dõi tiến trình, log phần trăm sau mỗi bước"""

    def __init__(self, total_steps: int, label: str = ""):
        self.total_steps = max(total_steps, 1)
        self.current_step = 0
        self.label = label
        self.start_time = datetime.datetime.now()

    def update(self, step: Optional[int] = None, message: str = ""):
        if step is not None:
            self.current_step = step
        else:
            self.current_step += 1

        percentage = (self.current_step / self.total_steps) * 100
        prefix = f"{self.label} " if self.label else ""
        if message:
            logger.info(f"{prefix}Progress: {percentage:.1f}% - {message}")
        else:
            logger.info(f"{prefix}Progress: {percentage:.1f}% ({self.current_step}/{self.total_steps})")

    def complete(self, message: str = "Completed") -> float:
        total_time = (datetime.datetime.now() - self.start_time).total_seconds()
        logger.info(f"{message} in {format_duration(total_time)}")
        return total_time


class ErrorHandler:
    """Xử lý lỗi: thông báo một dòng và exit code cho CLI"""

    @staticmethod
    def describe(error: Exception) -> str:
        if isinstance(error, MetricSpaceError):
            return f"{type(error).__name__}: {error}"
        if isinstance(error, OSError):
            return f"I/O error: {error}"
        return f"Unexpected error: {error}"

    @staticmethod
    def exit_code(error: Exception) -> int:
        """1 for input errors, 2 for mathematical findings surfaced as errors"""
        if isinstance(error, INPUT_ERRORS):
            return 1
        return 2 if isinstance(error, MetricSpaceError) else 1

    @staticmethod
    def log_error(error: Exception, context: str = ""):
        logger.error(f"Error in {context}: {ErrorHandler.describe(error)}")


def setup_logging(log_level: str = "INFO", log_file: Optional[str] = "logs/app.log"):
    """
    Thiết lập logging

    Args:
        log_level: Tên level, ví dụ "INFO" hoặc "DEBUG"
        log_file: File cho FileHandler; None thì chỉ log ra stream
    """
    handlers = [logging.StreamHandler()]
    if log_file:
        log_dir = os.path.dirname(log_file)
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
        handlers.insert(0, logging.FileHandler(log_file, encoding="utf-8"))

    logging.basicConfig(
        level=getattr(logging, log_level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=handlers,
        force=True,
    )


def is_unbounded(value: Any) -> bool:
    return isinstance(value, float) and math.isinf(value)


def within_factor(values: Sequence[float], factor: float) -> bool:
    """True when consecutive finite values differ by at most `factor`"""
    for a, b in zip(values, values[1:]):
        if is_unbounded(a) or is_unbounded(b):
            return False
        if a <= 0 or b <= 0:
            if a != b:
                return False
            continue
        if max(a, b) / min(a, b) > factor:
            return False
    return True


def format_duration(seconds: float) -> str:
    if seconds < 60:
        return f"{seconds:.1f}s"
    elif seconds < 3600:
        return f"{seconds / 60:.1f}m"
    return f"{seconds / 3600:.1f}h"
