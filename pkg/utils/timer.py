"""
Wall-clock timing for unlearning runs.

Uses the monotonic perf_counter clock. Reported values are rounded to the
microsecond by the report writers, never here.
"""
import time
from functools import wraps
from typing import Callable, Optional, Tuple, TypeVar

T = TypeVar("T")


class Stopwatch:
    """Monotonic stopwatch usable as a context manager."""

    def __init__(self):
        self._start: Optional[float] = None
        self._stop: Optional[float] = None

    def start(self) -> "Stopwatch":
        self._start = time.perf_counter()
        self._stop = None
        return self

    def stop(self) -> float:
        if self._start is None:
            raise RuntimeError("Stopwatch was never started")
        self._stop = time.perf_counter()
        return self.elapsed

    @property
    def elapsed(self) -> float:
        """Seconds between start and stop (or now, while running)."""
        if self._start is None:
            return 0.0
        end = self._stop if self._stop is not None else time.perf_counter()
        return max(0.0, end - self._start)

    def __enter__(self) -> "Stopwatch":
        return self.start()

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.stop()
        return False


def timed(func: Callable[..., T]) -> Callable[..., Tuple[T, float]]:
    """
    Decorator returning (result, elapsed_seconds) instead of result.

    Usage:
        @timed
        def body(...):
            ...
        model, seconds = body(...)
    """

    @wraps(func)
    def wrapper(*args, **kwargs):
        with Stopwatch() as watch:
            result = func(*args, **kwargs)
        return result, watch.elapsed

    return wrapper
