from __future__ import annotations

from pathlib import Path
from typing import Optional, Union


class SalientBoxError(Exception):
    """Base class for every error raised by salientbox."""


class InvalidParameterError(SalientBoxError, ValueError):
    pass


class DegenerateBoxError(InvalidParameterError):
    """Box collapses to zero cells along an axis at the configured stride."""


class NoSeparatorError(SalientBoxError):
    """Two peaks have no integer line strictly between them."""


class InfeasibleSceneError(SalientBoxError):
    pass


class FormatError(SalientBoxError):
    """Malformed map, JSON or CSV input."""

    def __init__(
        self,
        message: str,
        path: Optional[Union[str, Path]] = None,
        line: Optional[int] = None,
    ) -> None:
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = self.path if line is None else f"{self.path}:{line}"
        elif line is not None:
            location = f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)
