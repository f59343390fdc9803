from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from salientbox.config import SizeStrata
from salientbox.errors import InvalidParameterError
from salientbox.models import (
    BinaryMask,
    BoundingBox,
    CountCategory,
    MatchResult,
    PRPoint,
    SaliencyMap,
    ScoredBox,
)

Detections = Mapping[str, Sequence[ScoredBox]]
GroundTruth = Mapping[str, Sequence[BoundingBox]]

STRATUM_ALL = "all"
STRATUM_SMALL = "small"
STRATUM_LARGE = "large"
OBJECTS_NONE = "objects_0"
OBJECTS_FEW = "objects_1-3"
OBJECTS_MANY = "objects_4+"


def iou(a: BoundingBox, b: BoundingBox) -> float:
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return inter / (a.area + b.area - inter)


def iou_matrix(dets: Sequence[BoundingBox], gts: Sequence[BoundingBox]) -> np.ndarray:
    """Pairwise IoU, rows are detections."""
    if not dets or not gts:
        return np.zeros((len(dets), len(gts)))
    d = np.array([box.corners() for box in dets])
    g = np.array([box.corners() for box in gts])
    iw = np.minimum(d[:, None, 2], g[None, :, 2]) - np.maximum(d[:, None, 0], g[None, :, 0])
    ih = np.minimum(d[:, None, 3], g[None, :, 3]) - np.maximum(d[:, None, 1], g[None, :, 1])
    inter = np.clip(iw, 0.0, None) * np.clip(ih, 0.0, None)
    area_d = (d[:, 2] - d[:, 0]) * (d[:, 3] - d[:, 1])
    area_g = (g[:, 2] - g[:, 0]) * (g[:, 3] - g[:, 1])
    return inter / (area_d[:, None] + area_g[None, :] - inter)


def _check_tau(tau: float) -> None:
    if not 0.0 < tau <= 1.0:
        raise InvalidParameterError(f"IoU threshold must lie in (0, 1], got {tau}")


def match_detections(dets: Sequence[ScoredBox], gts: Sequence[BoundingBox], tau: float = 0.5) -> MatchResult:
    """Greedy one-to-one matching in descending score order.

    Each detection claims the unmatched ground truth with the highest IoU of
    at least ``tau``; equal scores keep input order and equal IoUs go to the
    lower ground-truth index.
    """
    _check_tau(tau)
    overlaps = iou_matrix([d.box for d in dets], list(gts))
    taken = np.zeros(len(gts), dtype=bool)
    pairs: List[Tuple[int, int, float]] = []
    matched_dets = set()
    for det in sorted(range(len(dets)), key=lambda i: -dets[i].score):
        if taken.all():
            break
        row = np.where(taken | (overlaps[det] < tau), -1.0, overlaps[det])
        gt = int(np.argmax(row))
        if row[gt] < 0:
            continue
        taken[gt] = True
        matched_dets.add(det)
        pairs.append((det, gt, float(overlaps[det, gt])))
    return MatchResult(
        pairs=pairs,
        unmatched_dets=[i for i in range(len(dets)) if i not in matched_dets],
        unmatched_gts=[int(i) for i in np.flatnonzero(~taken)],
    )


def _paired(dets: Detections, gts: GroundTruth) -> Iterable[Tuple[str, Sequence[ScoredBox], Sequence[BoundingBox]]]:
    orphans = sorted(set(dets) - set(gts))
    if orphans:
        raise InvalidParameterError(f"predictions without ground truth: {', '.join(orphans)}")
    for image in sorted(gts):
        yield image, dets.get(image, ()), gts[image]


def detection_pr(dets: Detections, gts: GroundTruth, tau: float = 0.5) -> PRPoint:
    """Pooled operating point; ground-truth images without predictions count as empty."""
    tp = fp = fn = 0
    for _, image_dets, image_gts in _paired(dets, gts):
        match = match_detections(image_dets, image_gts, tau)
        tp += match.tp
        fp += len(match.unmatched_dets)
        fn += len(match.unmatched_gts)
    return PRPoint.from_counts(tp, fp, fn)


def iou_sweep(dets: Detections, gts: GroundTruth, taus: Sequence[float]) -> List[PRPoint]:
    return [detection_pr(dets, gts, tau) for tau in taus]


@dataclass
class _BandCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def point(self) -> PRPoint:
        return PRPoint.from_counts(self.tp, self.fp, self.fn)


def stratified_pr(
    dets: Detections,
    gts: GroundTruth,
    strata: Optional[SizeStrata] = None,
    tau: float = 0.5,
) -> Dict[str, PRPoint]:
    """Micro PR for all objects and the small and large bands; unmatched detections band by their own area."""
    strata = strata or SizeStrata()
    bands: Dict[str, Callable[[float], bool]] = {
        STRATUM_ALL: lambda area: True,
        STRATUM_SMALL: strata.is_small,
        STRATUM_LARGE: strata.is_large,
    }
    counts = {name: _BandCounts() for name in bands}
    for _, image_dets, image_gts in _paired(dets, gts):
        match = match_detections(image_dets, image_gts, tau)
        for name, in_band in bands.items():
            band = counts[name]
            band.tp += sum(1 for _, gt, _ in match.pairs if in_band(image_gts[gt].area))
            band.fn += sum(1 for gt in match.unmatched_gts if in_band(image_gts[gt].area))
            band.fp += sum(1 for det in match.unmatched_dets if in_band(image_dets[det].box.area))
    return {name: band.point() for name, band in counts.items()}


def count_stratified_pr(dets: Detections, gts: GroundTruth, tau: float = 0.5) -> Dict[str, PRPoint]:
    """Micro PR over images grouped by ground-truth object count."""
    counts = {OBJECTS_NONE: _BandCounts(), OBJECTS_FEW: _BandCounts(), OBJECTS_MANY: _BandCounts()}
    for _, image_dets, image_gts in _paired(dets, gts):
        if not image_gts:
            group = OBJECTS_NONE
        elif len(image_gts) <= 3:
            group = OBJECTS_FEW
        else:
            group = OBJECTS_MANY
        match = match_detections(image_dets, image_gts, tau)
        counts[group].tp += match.tp
        counts[group].fp += len(match.unmatched_dets)
        counts[group].fn += len(match.unmatched_gts)
    return {name: band.point() for name, band in counts.items()}


def subitizing_metrics(
    preds: Sequence[CountCategory], gts: Sequence[CountCategory]
) -> Tuple[float, np.ndarray]:
    """Accuracy and the 4x4 confusion matrix (rows ground truth, columns prediction)."""
    if len(preds) != len(gts):
        raise InvalidParameterError(f"got {len(preds)} predictions for {len(gts)} ground truths")
    if not preds:
        raise InvalidParameterError("subitizing metrics need at least one sample")
    confusion = np.zeros((4, 4), dtype=np.int64)
    for pred, gt in zip(preds, gts):
        confusion[CountCategory.parse(gt).index, CountCategory.parse(pred).index] += 1
    return float(np.trace(confusion)) / len(preds), confusion


def pixel_pr_curve(
    maps: Sequence[SaliencyMap], gt_masks: Sequence[BinaryMask], thresholds: Sequence[float]
) -> List[PRPoint]:
    """Pooled pixel precision/recall of every map binarized at each threshold."""
    if len(maps) != len(gt_masks):
        raise InvalidParameterError(f"got {len(maps)} maps for {len(gt_masks)} masks")
    for index, (saliency, mask) in enumerate(zip(maps, gt_masks)):
        if saliency.values.shape != mask.bits.shape:
            raise InvalidParameterError(
                f"map {index} is {saliency.width}x{saliency.height} but its mask is {mask.width}x{mask.height}"
            )
    points: List[PRPoint] = []
    for theta in thresholds:
        tp = fp = fn = 0
        for saliency, mask in zip(maps, gt_masks):
            predicted = saliency.values >= theta
            tp += int(np.count_nonzero(predicted & mask.bits))
            fp += int(np.count_nonzero(predicted & ~mask.bits))
            fn += int(np.count_nonzero(~predicted & mask.bits))
        points.append(PRPoint.from_counts(tp, fp, fn))
    return points


def boxes_to_mask(boxes: Iterable[BoundingBox], width: int, height: int, scale: float = 1.0) -> BinaryMask:
    """Rasterize boxes; a pixel is set when its center divided by ``scale`` lies in any box."""
    if width < 1 or height < 1:
        raise InvalidParameterError(f"mask dimensions must be positive, got {width}x{height}")
    if scale <= 0:
        raise InvalidParameterError(f"scale must be positive, got {scale}")
    xs = (np.arange(width) + 0.5) / scale
    ys = (np.arange(height) + 0.5) / scale
    bits = np.zeros((height, width), dtype=bool)
    for box in boxes:
        inside_x = (xs >= box.x0) & (xs < box.x1)
        inside_y = (ys >= box.y0) & (ys < box.y1)
        bits |= inside_y[:, None] & inside_x[None, :]
    return BinaryMask(bits)
