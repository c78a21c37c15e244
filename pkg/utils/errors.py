"""
Exceptions raised across the unlearning lab.

Every error kind has its own class; the CLI, experiment runner and
dashboard catch the whole family through HeadBiasError.
"""
from typing import Optional


class HeadBiasError(Exception):
    """Base class for every error raised by this project."""


class InvalidInputError(HeadBiasError, ValueError):
    """Argument outside the operation's domain (empty, non-finite, out of range)."""


class ShapeError(HeadBiasError, ValueError):
    """Array dimensions do not line up."""


class ConfigError(HeadBiasError, ValueError):
    """Experiment or method configuration is invalid."""


class InvalidSplitError(HeadBiasError, ValueError):
    """Forgotten/retained class partition is not a proper partition."""


class NumericError(HeadBiasError, ArithmeticError):
    """Training produced a non-finite loss or gradient."""

    def __init__(self, message: str, epoch: Optional[int] = None):
        if epoch is not None:
            message = f"{message} (epoch {epoch})"
        super().__init__(message)
        self.epoch = epoch


class FormatError(HeadBiasError, ValueError):
    """A file on disk does not follow the expected binary layout."""

    def __init__(
        self,
        message: str,
        field: Optional[str] = None,
        offset: Optional[int] = None,
        path: Optional[str] = None,
    ):
        details = []
        if field:
            details.append(f"field '{field}'")
        if offset is not None:
            details.append(f"byte offset {offset}")
        if path:
            details.append(f"file {path}")
        if details:
            message = f"{message} [{', '.join(details)}]"
        super().__init__(message)
        self.field = field
        self.offset = offset
        self.path = path
