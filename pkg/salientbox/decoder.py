from __future__ import annotations

import bisect
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from salientbox.config import DecoderConfig
from salientbox.errors import InvalidParameterError, NoSeparatorError
from salientbox.models import (
    BoundingBox,
    CellBox,
    DecodeBranch,
    DecodeTrace,
    DetectionResult,
    Orientation,
    Peak,
    SaliencyMap,
    ScoredBox,
    SeparatingLine,
    SubitizingOutput,
)
from salientbox.policy import GateDecision, SubitizingGate
from salientbox.rasterops import (
    component_argmax,
    label_array,
    line_profile,
    resample_array,
    roi_max_array,
)
from salientbox.utils import clamp

logger = logging.getLogger(__name__)

FALLBACK_RATIO = 0.95

CellDetection = Tuple[CellBox, float]


def preprocess(saliency: SaliencyMap, cfg: DecoderConfig) -> SaliencyMap:
    """Optional bilinear upsampling to the decode resolution, then smoothing."""
    return SaliencyMap(_preprocess_array(saliency.values, cfg))


def _preprocess_array(values: np.ndarray, cfg: DecoderConfig) -> np.ndarray:
    out_h, out_w = values.shape
    if cfg.decode_resolution == "upsampled":
        out_w, out_h = cfg.output_size(out_w, out_h)
    values = resample_array(values, out_w, out_h, cfg.smooth_sigma)
    return np.clip(values, 0.0, 1.0, out=values)


def _single_detect_array(values: np.ndarray, theta: float) -> Optional[CellDetection]:
    if not 0.0 <= theta <= 1.0:
        raise InvalidParameterError(f"threshold must lie in [0, 1], got {theta}")
    labels, ordered = label_array(values >= theta)
    best: Optional[CellDetection] = None
    best_key: Tuple[float, int] = (-np.inf, -1)
    for lab, slices in ordered:
        ys, xs = slices
        extent = CellBox(xs.start, ys.start, xs.stop - 1, ys.stop - 1)
        # score over the whole box ROI on the continuous map
        key = (float(values[slices].max()), int(np.count_nonzero(labels[slices] == lab)))
        # strict comparison keeps the topmost-leftmost candidate on full ties
        if key > best_key:
            best, best_key = (extent, key[0]), key
    return best


def single_detect(saliency: SaliencyMap, theta_c: float) -> Optional[CellDetection]:
    """Strongest component above ``theta_c``: (extent in cells, max inside it), or None."""
    return _single_detect_array(saliency.values, theta_c)


def _find_peaks_array(
    values: np.ndarray,
    thresholds: Sequence[float],
    target: Optional[int],
    trace: Optional[DecodeTrace] = None,
) -> List[Peak]:
    peaks: Dict[Tuple[int, int], Peak] = {}
    for theta in thresholds:
        labels, ordered = label_array(values >= theta)
        for lab, slices in ordered:
            value, location = component_argmax(values, labels, lab, slices)
            if location not in peaks:
                peaks[location] = Peak(location=location, value=value)
        if trace is not None:
            trace.add_step(f"threshold {theta:g}: {len(ordered)} components, {len(peaks)} peaks")
        if target is not None and len(peaks) >= target:
            break
    return list(peaks.values())


def find_peaks(saliency: SaliencyMap, thresholds: Sequence[float], target: Optional[int] = None) -> List[Peak]:
    """Multi-level peak sweep from the highest threshold down.

    Each level contributes the argmax cell of every component; repeated
    locations collapse. The sweep stops after the first level that brings the
    set to ``target`` peaks, or runs through every level when ``target`` is
    None. Fewer peaks than the target are returned if the levels run out.
    """
    if target is not None and target < 1:
        raise InvalidParameterError(f"peak target must be positive, got {target}")
    return _find_peaks_array(saliency.values, thresholds, target)


def _separating_line(
    columns: np.ndarray,
    rows: np.ndarray,
    a: Peak,
    b: Peak,
) -> SeparatingLine:
    (ax, ay), (bx, by) = a.location, b.location
    if (ax, ay) == (bx, by):
        raise InvalidParameterError(f"peaks share location {a.location}")
    if abs(ax - bx) >= abs(ay - by):
        orientation, profile, lo, hi = Orientation.VERTICAL, columns, min(ax, bx), max(ax, bx)
    else:
        orientation, profile, lo, hi = Orientation.HORIZONTAL, rows, min(ay, by), max(ay, by)
    if hi - lo < 2:
        raise NoSeparatorError(f"no {orientation.value} line strictly between {a.location} and {b.location}")

    scores = profile[lo + 1 : hi]
    best = scores.min()
    tied = np.flatnonzero(scores == best) + lo + 1
    midpoint = (lo + hi) / 2.0
    position = min(tied.tolist(), key=lambda p: (abs(p - midpoint), p))
    return SeparatingLine(orientation=orientation, position=int(position), score=float(best))


def find_separating_line(saliency: SaliencyMap, a: Peak, b: Peak) -> SeparatingLine:
    """Full-extent line between two peaks with the lowest maximum; ties go to the midpoint."""
    values = saliency.values
    return _separating_line(
        line_profile(values, Orientation.VERTICAL),
        line_profile(values, Orientation.HORIZONTAL),
        a,
        b,
    )


def _interval(lines: List[int], coordinate: int, limit: int) -> Tuple[int, int]:
    index = bisect.bisect_left(lines, coordinate)
    low = lines[index - 1] + 1 if index > 0 else 0
    high = lines[index] - 1 if index < len(lines) else limit - 1
    return low, high


class BoxDecoder:
    """Subitizing-gated decoder; one instance can serve any number of maps."""

    def __init__(self, config: Optional[DecoderConfig] = None, gate: Optional[SubitizingGate] = None) -> None:
        self.config = config or DecoderConfig()
        self.gate = gate or SubitizingGate(self.config.theta_c)

    def detect(self, saliency: SaliencyMap, sub: SubitizingOutput) -> DetectionResult:
        cfg = self.config
        trace = DecodeTrace()
        decision = self.gate.route(sub)
        trace.add_step(f"gate: {decision.branch.value} ({', '.join(decision.reasons)})")
        if decision.branch == DecodeBranch.EMPTY:
            return DetectionResult(boxes=[], branch=decision.branch, trace=trace)

        values = _preprocess_array(saliency.values, cfg)
        if decision.branch == DecodeBranch.SINGLE:
            found = _single_detect_array(values, cfg.theta_c)
            detections = [found] if found is not None else []
            if found is None:
                trace.add_escalation("single branch: nothing above theta_c")
        else:
            detections = self._multi_detect_array(values, decision, trace)

        boxes = [
            ScoredBox(box=self._to_pixels(cell_box, saliency, values.shape), score=clamp(score))
            for cell_box, score in detections
        ]
        logger.debug("decoded %d boxes via %s branch", len(boxes), decision.branch.value)
        return DetectionResult(boxes=boxes, branch=decision.branch, trace=trace)

    def multi_detect(self, saliency: SaliencyMap, sub: SubitizingOutput) -> DetectionResult:
        """Multi-object extraction on an already preprocessed map, in map pixel units."""
        decision = self.gate.route(sub)
        if decision.branch != DecodeBranch.MULTI:
            decision = GateDecision(
                branch=DecodeBranch.MULTI,
                allow_fallback=decision.branch == DecodeBranch.SINGLE,
                reasons=decision.reasons + ["unbounded_sweep"],
            )
        trace = DecodeTrace()
        detections = self._multi_detect_array(saliency.values, decision, trace)
        boxes = [
            ScoredBox(box=BoundingBox.from_corners(c.x0, c.y0, c.x1 + 1, c.y1 + 1), score=clamp(score))
            for c, score in detections
        ]
        return DetectionResult(boxes=boxes, branch=DecodeBranch.MULTI, trace=trace)

    def reliable_peaks(self, saliency: SaliencyMap, target: Optional[int] = None) -> List[Peak]:
        peaks = _find_peaks_array(saliency.values, self.config.peak_thresholds, target)
        return [peak for peak in peaks if peak.value >= self.config.theta_c]

    def _multi_detect_array(self, values: np.ndarray, decision: GateDecision, trace: DecodeTrace) -> List[CellDetection]:
        cfg = self.config
        peaks = _find_peaks_array(values, cfg.peak_thresholds, decision.peak_target, trace)
        reliable = [peak for peak in peaks if peak.value >= cfg.theta_c]
        if len(reliable) < len(peaks):
            trace.add_step(f"dropped {len(peaks) - len(reliable)} peaks below theta_c")
        if not reliable:
            return self._fallback(values, decision, trace)

        columns = line_profile(values, Orientation.VERTICAL)
        rows = line_profile(values, Orientation.HORIZONTAL)
        kept: List[Peak] = []
        lines: List[SeparatingLine] = []
        for peak in sorted(reliable, key=lambda p: -p.value):
            try:
                new_lines = [_separating_line(columns, rows, other, peak) for other in kept]
            except NoSeparatorError:
                trace.add_escalation(f"merged peak {peak.location} into a stronger neighbour")
                continue
            kept.append(peak)
            lines.extend(new_lines)

        verticals = sorted({line.position for line in lines if line.orientation == Orientation.VERTICAL})
        horizontals = sorted({line.position for line in lines if line.orientation == Orientation.HORIZONTAL})
        height, width = values.shape
        regions: Dict[CellBox, Peak] = {}
        for peak in kept:
            x0, x1 = _interval(verticals, peak.location[0], width)
            y0, y1 = _interval(horizontals, peak.location[1], height)
            region = CellBox(x0, y0, x1, y1)
            if region in regions:
                trace.add_escalation(f"peak {peak.location} shares a region; keeping the stronger peak")
                continue
            regions[region] = peak
        trace.add_step(f"{len(lines)} separating lines, {len(regions)} regions")

        detections: List[CellDetection] = []
        for region in regions:
            found = _single_detect_array(values[region.slices], cfg.theta_c)
            if found is None:
                continue
            cell_box, score = found
            detections.append((cell_box.shifted(region.x0, region.y0), score))
        return detections

    def _fallback(self, values: np.ndarray, decision: GateDecision, trace: DecodeTrace) -> List[CellDetection]:
        peak_value, location = roi_max_array(values, CellBox.full(values.shape[1], values.shape[0]))
        if not decision.allow_fallback or peak_value <= 0.0:
            trace.add_step("no reliable peaks")
            return []
        trace.add_escalation(f"no reliable peaks; falling back to the global maximum at {location}")
        found = _single_detect_array(values, FALLBACK_RATIO * peak_value)
        return [found] if found is not None else []

    def _to_pixels(self, cell_box: CellBox, saliency: SaliencyMap, shape: Tuple[int, int]) -> BoundingBox:
        cfg = self.config
        s = cfg.stride
        frame_w, frame_h = saliency.width * s, saliency.height * s
        out_h, out_w = shape
        if cfg.decode_resolution == "native" or (out_w, out_h) == (saliency.width, saliency.height):
            box = BoundingBox.from_corners(cell_box.x0 * s, cell_box.y0 * s, (cell_box.x1 + 1) * s, (cell_box.y1 + 1) * s)
        elif cfg.register_lattice:
            # pixel boundary b samples map coordinate b/scale - 1/2; cell x sits at pixel x*s
            sx, sy = out_w / saliency.width, out_h / saliency.height
            box = BoundingBox.from_corners(
                (cell_box.x0 / sx - 0.5) * s,
                (cell_box.y0 / sy - 0.5) * s,
                ((cell_box.x1 + 1) / sx - 0.5) * s,
                ((cell_box.y1 + 1) / sy - 0.5) * s,
            )
        else:
            frame_w, frame_h = out_w, out_h
            box = BoundingBox.from_corners(cell_box.x0, cell_box.y0, cell_box.x1 + 1, cell_box.y1 + 1)

        if cfg.box_rescale:
            box = box.expanded(cfg.rescale_factor)
        if box.x1 > 0 and box.y1 > 0 and box.x0 < frame_w and box.y0 < frame_h:
            box = box.clipped(frame_w, frame_h)
        return box


def multi_detect(saliency: SaliencyMap, sub: SubitizingOutput, cfg: Optional[DecoderConfig] = None) -> DetectionResult:
    return BoxDecoder(cfg).multi_detect(saliency, sub)


def detect(saliency: SaliencyMap, sub: SubitizingOutput, cfg: Optional[DecoderConfig] = None) -> DetectionResult:
    """Decode a raw predicted map into the exact set of salient-object boxes."""
    return BoxDecoder(cfg).detect(saliency, sub)
