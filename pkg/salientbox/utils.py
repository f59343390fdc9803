from __future__ import annotations

from typing import List, Tuple

from salientbox.errors import InvalidParameterError


def clamp(value: float, low: float = 0.0, high: float = 1.0) -> float:
    return max(low, min(high, value))


def parse_float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise InvalidParameterError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_int_range(text: str) -> Tuple[int, int]:
    """Parse "2" or "1..3" into an inclusive (low, high) pair."""
    try:
        if ".." in text:
            low, high = text.split("..", 1)
            bounds = (int(low), int(high))
        else:
            bounds = (int(text), int(text))
    except ValueError as exc:
        raise InvalidParameterError(f"expected N or A..B, got {text!r}") from exc
    if bounds[0] > bounds[1]:
        raise InvalidParameterError(f"empty range {text!r}")
    return bounds


def parse_area(text: str) -> int:
    """Parse "75x75" (or a bare area) into square pixels."""
    try:
        if "x" in text:
            w, h = text.lower().split("x", 1)
            return int(w) * int(h)
        return int(text)
    except ValueError as exc:
        raise InvalidParameterError(f"expected WxH, got {text!r}") from exc
