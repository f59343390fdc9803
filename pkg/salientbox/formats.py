"""File formats: RSDMAP text maps, PGM input, JSON records and CSV reports."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from salientbox.config import EncoderConfig
from salientbox.errors import FormatError, InvalidParameterError
from salientbox.models import (
    BoundingBox,
    CountCategory,
    CountDistribution,
    DetectionResult,
    PRPoint,
    SaliencyMap,
    SceneSpec,
    ScoredBox,
    SubitizingOutput,
)

MAP_MAGIC = "RSDMAP 1"
DETECTION_HEADER = ("metric", "stratum", "tau", "value")
MAP_PR_HEADER = ("threshold", "precision", "recall")
COUNT_HEADER = ("metric", "value")

PathLike = Union[str, Path]


def emit_map(saliency: SaliencyMap) -> str:
    lines = [MAP_MAGIC, f"{saliency.width} {saliency.height}"]
    lines.extend(" ".join(f"{v:.9g}" for v in row) for row in saliency.values.tolist())
    return "\n".join(lines) + "\n"


def parse_map(text: str, path: Optional[PathLike] = None) -> SaliencyMap:
    """Parse an RSDMAP text map; errors carry the offending line number."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAP_MAGIC:
        raise FormatError(f"expected {MAP_MAGIC!r} header", path=path, line=1)
    try:
        width, height = (int(token) for token in lines[1].split())
    except (IndexError, ValueError) as exc:
        raise FormatError("expected '<width> <height>'", path=path, line=2) from exc
    if width < 1 or height < 1:
        raise FormatError(f"map dimensions must be positive, got {width}x{height}", path=path, line=2)

    rows = lines[2:]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != height:
        raise FormatError(f"expected {height} rows, found {len(rows)}", path=path, line=3 + min(len(rows), height))
    values = np.empty((height, width), dtype=np.float64)
    for y, row in enumerate(rows):
        tokens = row.split()
        if len(tokens) != width:
            raise FormatError(f"expected {width} values, found {len(tokens)}", path=path, line=3 + y)
        try:
            values[y] = [float(token) for token in tokens]
        except ValueError as exc:
            raise FormatError(f"invalid number in row {y}", path=path, line=3 + y) from exc
    if not np.isfinite(values).all():
        raise FormatError("map contains non-finite values", path=path)
    return SaliencyMap(values)


def read_pgm(source: Union[PathLike, bytes]) -> SaliencyMap:
    """Binary PGM (P5) input scaled to [0, 1]; values are quantized to 8 bits."""
    path = None if isinstance(source, bytes) else source
    handle = io.BytesIO(source) if isinstance(source, bytes) else source
    try:
        with Image.open(handle) as image:
            if image.format != "PPM" or image.mode != "L":
                raise FormatError(f"expected an 8-bit grayscale PGM, got {image.format} {image.mode}", path=path)
            values = np.asarray(image, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise FormatError(f"unreadable PGM: {exc}", path=path) from exc
    return SaliencyMap(values)


class AnnotationRecord(BaseModel):
    """Ground truth for one image; count-only records omit ``boxes``."""

    image: str
    width: int = Field(gt=0)
    height: int = Field(gt=0)
    stride: int = Field(gt=0)
    count: int = Field(ge=0)
    boxes: Optional[List[BoundingBox]] = None

    @model_validator(mode="after")
    def _count_matches_boxes(self) -> "AnnotationRecord":
        if self.boxes is not None and len(self.boxes) != self.count:
            raise ValueError(f"count {self.count} disagrees with {len(self.boxes)} boxes")
        return self

    @property
    def has_boxes(self) -> bool:
        return self.boxes is not None

    @property
    def category(self) -> CountCategory:
        return CountCategory.from_count(self.count)

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(image_width=self.width, image_height=self.height, stride=self.stride)

    @classmethod
    def from_scene(cls, scene: SceneSpec) -> "AnnotationRecord":
        return cls(
            image=scene.image,
            width=scene.width,
            height=scene.height,
            stride=scene.stride,
            count=len(scene.boxes),
            boxes=list(scene.boxes),
        )


class DetectionBox(BaseModel):
    """Corner-form box: top-left origin plus extent."""

    x: float
    y: float
    w: float = Field(gt=0)
    h: float = Field(gt=0)
    score: float = Field(ge=0.0, le=1.0)

    @classmethod
    def from_scored(cls, scored: ScoredBox) -> "DetectionBox":
        box = scored.box
        return cls(x=box.x0, y=box.y0, w=box.w, h=box.h, score=scored.score)

    def to_scored(self) -> ScoredBox:
        return ScoredBox(box=BoundingBox.from_xywh(self.x, self.y, self.w, self.h), score=self.score)


class DetectionRecord(BaseModel):
    image: str
    boxes: List[DetectionBox] = Field(default_factory=list)
    count_pred: int = Field(ge=0)
    subitizing: SubitizingOutput

    @model_validator(mode="after")
    def _count_matches_boxes(self) -> "DetectionRecord":
        if self.count_pred != len(self.boxes):
            raise ValueError(f"count_pred {self.count_pred} disagrees with {len(self.boxes)} boxes")
        return self

    @classmethod
    def from_result(cls, image: str, result: DetectionResult, sub: SubitizingOutput) -> "DetectionRecord":
        return cls(
            image=image,
            boxes=[DetectionBox.from_scored(scored) for scored in result.boxes],
            count_pred=result.predicted_count,
            subitizing=sub,
        )

    def scored_boxes(self) -> List[ScoredBox]:
        return [box.to_scored() for box in self.boxes]


class SubitizingRecord(BaseModel):
    """One sidecar entry: a count output given directly, as probabilities or as raw scores."""

    image: str
    category: Optional[CountCategory] = None
    confidence: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    probs: Optional[Tuple[float, float, float, float]] = None
    logits: Optional[Tuple[float, float, float, float]] = None

    @field_validator("category", mode="before")
    @classmethod
    def _coerce_category(cls, value):
        return None if value is None else CountCategory.parse(value)

    @model_validator(mode="after")
    def _one_source(self) -> "SubitizingRecord":
        given = [name for name in ("category", "probs", "logits") if getattr(self, name) is not None]
        if len(given) != 1:
            raise ValueError("expected exactly one of category, probs or logits")
        if self.category is not None and self.confidence is None:
            raise ValueError("category needs a confidence")
        self.distribution()
        return self

    def distribution(self) -> Optional[CountDistribution]:
        if self.probs is not None:
            return CountDistribution(probs=self.probs)
        if self.logits is not None:
            return CountDistribution.from_logits(self.logits)
        return None

    def output(self) -> SubitizingOutput:
        distribution = self.distribution()
        if distribution is not None:
            return SubitizingOutput.from_distribution(distribution)
        return SubitizingOutput(category=self.category, confidence=self.confidence)


def _load_json(text: str, path: Optional[PathLike]):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, path=path, line=exc.lineno) from exc


def _records(payload) -> List[dict]:
    return payload if isinstance(payload, list) else [payload]


def _validate(model, raw, path: Optional[PathLike], index: int):
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        raise FormatError(f"record {index}: {exc.errors()[0]['msg']}", path=path) from exc


def parse_annotations(text: str, path: Optional[PathLike] = None) -> List[AnnotationRecord]:
    """A single annotation object or an array of them."""
    return [_validate(AnnotationRecord, raw, path, i) for i, raw in enumerate(_records(_load_json(text, path)))]


def parse_detections(text: str, path: Optional[PathLike] = None) -> List[DetectionRecord]:
    return [_validate(DetectionRecord, raw, path, i) for i, raw in enumerate(_records(_load_json(text, path)))]


def parse_subitizing(text: str, path: Optional[PathLike] = None) -> Dict[str, SubitizingOutput]:
    """Flat ``{image, category, confidence}``, ``{image, probs}`` or ``{image, logits}`` entries, or detection records carrying ``subitizing``."""
    outputs: Dict[str, SubitizingOutput] = {}
    for index, raw in enumerate(_records(_load_json(text, path))):
        if isinstance(raw, dict) and "subitizing" in raw:
            raw = {"image": raw.get("image"), **(raw["subitizing"] or {})}
        record = _validate(SubitizingRecord, raw, path, index)
        outputs[record.image] = record.output()
    return outputs


def dump_record(record: BaseModel) -> str:
    return record.model_dump_json(indent=2, exclude_none=True) + "\n"


def _fmt(value: float, precision: int) -> str:
    return f"{value:.{precision}f}"


def _write_csv(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def detection_report_rows(
    by_tau: Mapping[float, Mapping[str, PRPoint]],
    false_positives: Optional[Mapping[float, int]] = None,
    precision: int = 6,
) -> str:
    """``metric,stratum,tau,value`` rows; background strata report a false-positive count."""
    rows: List[Tuple[str, str, str, str]] = []
    for tau, strata in by_tau.items():
        tau_text = _fmt(tau, precision)
        for stratum, point in strata.items():
            for metric in ("precision", "recall", "f1"):
                rows.append((metric, stratum, tau_text, _fmt(getattr(point, metric), precision)))
        if false_positives is not None and tau in false_positives:
            rows.append(("false_positives", "objects_0", tau_text, _fmt(false_positives[tau], precision)))
    return _write_csv(DETECTION_HEADER, rows)


def map_pr_rows(thresholds: Sequence[float], points: Sequence[PRPoint], precision: int = 6) -> str:
    return _write_csv(
        MAP_PR_HEADER,
        ((_fmt(t, precision), _fmt(p.precision, precision), _fmt(p.recall, precision)) for t, p in zip(thresholds, points)),
    )


def count_report_rows(accuracy: float, confusion: np.ndarray, precision: int = 6) -> str:
    categories = [category.value for category in CountCategory]
    rows = [("accuracy", _fmt(accuracy, precision))]
    for g, gt in enumerate(categories):
        for p, pred in enumerate(categories):
            rows.append((f"confusion_{gt}_{pred}", _fmt(float(confusion[g, p]), precision)))
    return _write_csv(COUNT_HEADER, rows)


def parse_csv(text: str, header: Sequence[str], path: Optional[PathLike] = None) -> List[Dict[str, str]]:
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != tuple(header):
        raise FormatError(f"expected header {','.join(header)}", path=path, line=1)
    return list(reader)


def require_paired(predicted: Iterable[str], truth: Iterable[str]) -> None:
    """Predictions and ground truth must cover the same image ids."""
    predicted_ids, truth_ids = set(predicted), set(truth)
    problems: List[str] = []
    if predicted_ids - truth_ids:
        problems.append(f"no ground truth for: {', '.join(sorted(predicted_ids - truth_ids))}")
    if truth_ids - predicted_ids:
        problems.append(f"no prediction for: {', '.join(sorted(truth_ids - predicted_ids))}")
    if problems:
        raise InvalidParameterError("; ".join(problems))
