from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from salientbox.errors import InvalidParameterError


class CountCategory(str, Enum):
    ZERO = "0"
    ONE = "1"
    TWO = "2"
    MANY = "3+"

    @property
    def index(self) -> int:
        return _CATEGORY_ORDER.index(self)

    @property
    def numeric(self) -> int:
        """Smallest count in the bucket; 3+ compares as 3."""
        return self.index

    @classmethod
    def from_count(cls, count: int) -> "CountCategory":
        if count < 0:
            raise InvalidParameterError(f"object count must be nonnegative, got {count}")
        return _CATEGORY_ORDER[min(count, 3)]

    @classmethod
    def from_index(cls, index: int) -> "CountCategory":
        if not 0 <= index < len(_CATEGORY_ORDER):
            raise InvalidParameterError(f"invalid count category index {index}")
        return _CATEGORY_ORDER[index]

    @classmethod
    def parse(cls, value) -> "CountCategory":
        if isinstance(value, CountCategory):
            return value
        if isinstance(value, int):
            return cls.from_index(value)
        try:
            return cls(str(value))
        except ValueError as exc:
            raise InvalidParameterError(f"invalid count category {value!r}") from exc


_CATEGORY_ORDER = (CountCategory.ZERO, CountCategory.ONE, CountCategory.TWO, CountCategory.MANY)


class Orientation(str, Enum):
    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"


class DecodeBranch(str, Enum):
    EMPTY = "empty"
    SINGLE = "single"
    MULTI = "multi"


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    """Row-major grid of finite activations; ``values[y, x]``."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.size == 0:
            raise InvalidParameterError(f"saliency map must be a non-empty 2-D grid, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise InvalidParameterError("saliency map contains non-finite values")
        object.__setattr__(self, "values", values)

    @property
    def width(self) -> int:
        return int(self.values.shape[1])

    @property
    def height(self) -> int:
        return int(self.values.shape[0])

    @classmethod
    def zeros(cls, width: int, height: int) -> "SaliencyMap":
        if width < 1 or height < 1:
            raise InvalidParameterError(f"map dimensions must be positive, got {width}x{height}")
        return cls(np.zeros((height, width)))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "SaliencyMap":
        return cls(np.array(rows, dtype=np.float64))

    def allclose(self, other: "SaliencyMap", atol: float = 1e-9) -> bool:
        return self.values.shape == other.values.shape and bool(np.allclose(self.values, other.values, rtol=0.0, atol=atol))


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim != 2 or bits.size == 0:
            raise InvalidParameterError(f"mask must be a non-empty 2-D grid, got shape {bits.shape}")
        object.__setattr__(self, "bits", bits)

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))


@dataclass(frozen=True)
class CellBox:
    """Inclusive cell range ``[x0, x1] x [y0, y1]`` on a grid."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self) -> None:
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise InvalidParameterError(f"empty cell box {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0 + 1

    @property
    def height(self) -> int:
        return self.y1 - self.y0 + 1

    @property
    def slices(self) -> Tuple[slice, slice]:
        return slice(self.y0, self.y1 + 1), slice(self.x0, self.x1 + 1)

    def contains(self, x: int, y: int) -> bool:
        return self.x0 <= x <= self.x1 and self.y0 <= y <= self.y1

    def shifted(self, dx: int, dy: int) -> "CellBox":
        return CellBox(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def clipped(self, width: int, height: int) -> Optional["CellBox"]:
        x0, y0 = max(self.x0, 0), max(self.y0, 0)
        x1, y1 = min(self.x1, width - 1), min(self.y1, height - 1)
        if x1 < x0 or y1 < y0:
            return None
        return CellBox(x0, y0, x1, y1)

    @classmethod
    def full(cls, width: int, height: int) -> "CellBox":
        return cls(0, 0, width - 1, height - 1)


@dataclass(frozen=True, eq=False)
class Component:
    id: int
    pixel_count: int
    extent: CellBox
    # (x, y) member cells, one per row
    pixels: np.ndarray


@dataclass(frozen=True)
class Peak:
    location: Tuple[int, int]
    value: float


@dataclass(frozen=True)
class SeparatingLine:
    orientation: Orientation
    position: int
    score: float


class BoundingBox(BaseModel):
    """Axis-aligned box in center form, pixel units."""

    model_config = ConfigDict(frozen=True)

    cx: float
    cy: float
    w: float
    h: float

    @field_validator("w", "h")
    @classmethod
    def _positive_extent(cls, value: float) -> float:
        if not value > 0 or not math.isfinite(value):
            raise ValueError("box extents must be positive and finite")
        return value

    @classmethod
    def from_corners(cls, x0: float, y0: float, x1: float, y1: float) -> "BoundingBox":
        return cls(cx=(x0 + x1) / 2.0, cy=(y0 + y1) / 2.0, w=x1 - x0, h=y1 - y0)

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "BoundingBox":
        return cls.from_corners(x, y, x + w, y + h)

    @property
    def x0(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def y0(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def x1(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def y1(self) -> float:
        return self.cy + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    def corners(self) -> Tuple[float, float, float, float]:
        return self.x0, self.y0, self.x1, self.y1

    def within(self, width: float, height: float, tol: float = 1e-9) -> bool:
        return self.x0 >= -tol and self.y0 >= -tol and self.x1 <= width + tol and self.y1 <= height + tol

    def expanded(self, factor: float) -> "BoundingBox":
        return BoundingBox(cx=self.cx, cy=self.cy, w=self.w * factor, h=self.h * factor)

    def clipped(self, width: float, height: float) -> "BoundingBox":
        return BoundingBox.from_corners(
            max(self.x0, 0.0), max(self.y0, 0.0), min(self.x1, width), min(self.y1, height)
        )


class ScoredBox(BaseModel):
    box: BoundingBox
    score: float = Field(ge=0.0, le=1.0)


class GaussianParams(BaseModel):
    """Per-box Gaussian in map cells: mean, per-axis sigma, truncation ROI."""

    model_config = ConfigDict(frozen=True)

    mu: Tuple[int, int]
    axis_sigma: Tuple[float, float]
    roi: CellBox


class SubitizingOutput(BaseModel):
    model_config = ConfigDict(frozen=True)

    category: CountCategory
    confidence: float = Field(ge=0.0, le=1.0)

    @field_validator("category", mode="before")
    @classmethod
    def _coerce_category(cls, value):
        return CountCategory.parse(value)

    @classmethod
    def from_distribution(cls, distribution: "CountDistribution") -> "SubitizingOutput":
        index = int(np.argmax(distribution.probs))
        return cls(category=CountCategory.from_index(index), confidence=float(distribution.probs[index]))


class CountDistribution(BaseModel):
    """Probabilities over the categories 0, 1, 2, 3+."""

    model_config = ConfigDict(frozen=True)

    probs: Tuple[float, float, float, float]

    @field_validator("probs")
    @classmethod
    def _normalized(cls, probs):
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(sum(probs) - 1.0) > 1e-6:
            raise ValueError("probabilities must sum to 1")
        return probs

    @classmethod
    def from_logits(cls, logits: Iterable[float]) -> "CountDistribution":
        scores = np.asarray(list(logits), dtype=np.float64)
        if scores.shape != (4,):
            raise InvalidParameterError("expected four category scores")
        exp = np.exp(scores - scores.max())
        probs = exp / exp.sum()
        return cls(probs=tuple(float(p) for p in probs))

    @classmethod
    def one_hot(cls, category: CountCategory) -> "CountDistribution":
        probs = [0.0] * 4
        probs[CountCategory.parse(category).index] = 1.0
        return cls(probs=tuple(probs))


class DecodeTrace(BaseModel):
    steps: List[str] = Field(default_factory=list)
    escalations: List[str] = Field(default_factory=list)

    def add_step(self, text: str) -> None:
        self.steps.append(text)

    def add_escalation(self, text: str) -> None:
        self.escalations.append(text)


class DetectionResult(BaseModel):
    boxes: List[ScoredBox] = Field(default_factory=list)
    branch: DecodeBranch = DecodeBranch.EMPTY
    trace: DecodeTrace = Field(default_factory=DecodeTrace)

    @property
    def predicted_count(self) -> int:
        return len(self.boxes)


class MatchResult(BaseModel):
    pairs: List[Tuple[int, int, float]] = Field(default_factory=list)
    unmatched_dets: List[int] = Field(default_factory=list)
    unmatched_gts: List[int] = Field(default_factory=list)

    @property
    def tp(self) -> int:
        return len(self.pairs)


class PRPoint(BaseModel):
    precision: float
    recall: float
    f1: float
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "PRPoint":
        precision = tp / (tp + fp) if tp + fp else 1.0
        recall = tp / (tp + fn) if tp + fn else 1.0
        f1 = 2.0 * precision * recall / (precision + recall) if precision + recall else 0.0
        return cls(precision=precision, recall=recall, f1=f1, tp=tp, fp=fp, fn=fn)


class SceneSpec(BaseModel):
    """Synthetic ground truth for one image."""

    image: str = "scene"
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    stride: int = Field(gt=0)
    boxes: List[BoundingBox] = Field(default_factory=list)
    seed: int = 0

    @property
    def count_category(self) -> CountCategory:
        return CountCategory.from_count(len(self.boxes))


class NoiseSpec(BaseModel):
    additive_sigma: float = Field(default=0.0, ge=0.0)
    clutter_blobs: int = Field(default=0, ge=0)
    clutter_amplitude: float = Field(default=0.4, ge=0.0)
    clutter_sigma_cells: float = Field(default=1.0, gt=0.0)
    theta_c: float = Field(default=0.7, gt=0.0, lt=1.0)

    @model_validator(mode="after")
    def _clutter_below_evidence(self) -> "NoiseSpec":
        if self.clutter_amplitude >= self.theta_c:
            raise ValueError("clutter amplitude must stay below theta_c")
        return self

    @property
    def is_clean(self) -> bool:
        return self.additive_sigma == 0.0 and self.clutter_blobs == 0
