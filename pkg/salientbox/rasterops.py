from __future__ import annotations

import math
from functools import lru_cache
from typing import List, Tuple

import numpy as np
from scipy import ndimage

from salientbox.errors import InvalidParameterError
from salientbox.models import BinaryMask, CellBox, Component, Orientation, SaliencyMap

_EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


def threshold_map(saliency: SaliencyMap, theta: float) -> BinaryMask:
    if not 0.0 <= theta <= 1.0:
        raise InvalidParameterError(f"threshold must lie in [0, 1], got {theta}")
    return BinaryMask(saliency.values >= theta)


@lru_cache(maxsize=64)
def _kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-0.5 * (offsets / sigma) ** 2)
    weights /= weights.sum()
    weights.setflags(write=False)
    return weights


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D kernel of radius ceil(3*sigma)."""
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return np.ones(1)
    return _kernel(float(sigma)).copy()


def blur_array(values: np.ndarray, sigma: float) -> np.ndarray:
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be nonnegative, got {sigma}")
    if sigma == 0:
        return values.copy()
    weights = _kernel(float(sigma))
    out = ndimage.correlate1d(values, weights, axis=0, mode="nearest")
    out = ndimage.correlate1d(out, weights, axis=1, mode="nearest")
    # convex combination; clip away rounding past the input range
    return np.clip(out, values.min(), values.max(), out=out)


def gaussian_blur(saliency: SaliencyMap, sigma: float) -> SaliencyMap:
    """Separable Gaussian blur with edge replication at the borders."""
    return SaliencyMap(blur_array(saliency.values, sigma))


def _axis_weights(size_in: int, size_out: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    scale = size_in / size_out
    src = (np.arange(size_out, dtype=np.float64) + 0.5) * scale - 0.5
    np.clip(src, 0.0, size_in - 1, out=src)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, size_in - 1)
    return lo, hi, src - lo


def upsample_array(values: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    if out_w < 1 or out_h < 1:
        raise InvalidParameterError(f"output size must be positive, got {out_w}x{out_h}")
    in_h, in_w = values.shape
    y_lo, y_hi, wy = _axis_weights(in_h, out_h)
    x_lo, x_hi, wx = _axis_weights(in_w, out_w)
    rows = values[y_lo, :] * (1.0 - wy)[:, None] + values[y_hi, :] * wy[:, None]
    out = rows[:, x_lo] * (1.0 - wx)[None, :] + rows[:, x_hi] * wx[None, :]
    return np.clip(out, values.min(), values.max(), out=out)


def upsample_bilinear(saliency: SaliencyMap, out_w: int, out_h: int) -> SaliencyMap:
    """Bilinear resampling with half-pixel center alignment."""
    return SaliencyMap(upsample_array(saliency.values, out_w, out_h))


@lru_cache(maxsize=32)
def resample_matrix(size_in: int, size_out: int, sigma: float) -> np.ndarray:
    """One axis of bilinear resampling followed by an edge-replicated blur, as a dense (out, in) matrix."""
    rows = np.arange(size_out)
    if size_in == size_out:
        matrix = np.eye(size_out)
    else:
        lo, hi, w = _axis_weights(size_in, size_out)
        matrix = np.zeros((size_out, size_in))
        np.add.at(matrix, (rows, lo), 1.0 - w)
        np.add.at(matrix, (rows, hi), w)
    if sigma > 0:
        weights = _kernel(float(sigma))
        radius = len(weights) // 2
        blur = np.zeros((size_out, size_out))
        for offset, weight in enumerate(weights):
            np.add.at(blur, (rows, np.clip(rows + offset - radius, 0, size_out - 1)), weight)
        matrix = blur @ matrix
    matrix.setflags(write=False)
    return matrix


def resample_array(values: np.ndarray, out_w: int, out_h: int, sigma: float) -> np.ndarray:
    """``blur_array(upsample_array(values, out_w, out_h), sigma)`` as two matrix products."""
    if sigma < 0:
        raise InvalidParameterError(f"sigma must be nonnegative, got {sigma}")
    if out_w < 1 or out_h < 1:
        raise InvalidParameterError(f"output size must be positive, got {out_w}x{out_h}")
    in_h, in_w = values.shape
    if (in_h, in_w) == (out_h, out_w) and sigma == 0:
        return values.copy()
    out = resample_matrix(in_h, out_h, float(sigma)) @ values @ resample_matrix(in_w, out_w, float(sigma)).T
    return np.clip(out, values.min(), values.max(), out=out)


def label_array(bits: np.ndarray) -> Tuple[np.ndarray, List[Tuple[int, Tuple[slice, slice]]]]:
    """8-connected labels plus ``(label, slices)`` pairs ordered by first row-major pixel."""
    labels, count = ndimage.label(bits, structure=_EIGHT_CONNECTED)
    if count == 0:
        return labels, []
    boxes = ndimage.find_objects(labels)

    def first_pixel(lab: int) -> Tuple[int, int]:
        ys, xs = boxes[lab - 1]
        top = labels[ys.start, xs]
        return ys.start, xs.start + int(np.argmax(top == lab))

    order = sorted(range(1, count + 1), key=first_pixel)
    return labels, [(lab, boxes[lab - 1]) for lab in order]


def _extent(slices: Tuple[slice, slice]) -> CellBox:
    ys, xs = slices
    return CellBox(xs.start, ys.start, xs.stop - 1, ys.stop - 1)


def connected_components(mask: BinaryMask) -> List[Component]:
    labels, ordered = label_array(mask.bits)
    components: List[Component] = []
    for index, (lab, slices) in enumerate(ordered):
        ys, xs = np.nonzero(labels[slices] == lab)
        extent = _extent(slices)
        pixels = np.column_stack((xs + extent.x0, ys + extent.y0))
        components.append(Component(id=index, pixel_count=int(len(xs)), extent=extent, pixels=pixels))
    return components


def component_argmax(values: np.ndarray, labels: np.ndarray, lab: int, slices: Tuple[slice, slice]) -> Tuple[float, Tuple[int, int]]:
    """Maximum over one labeled component, first in row-major order."""
    window = values[slices]
    masked = np.where(labels[slices] == lab, window, -np.inf)
    flat = int(np.argmax(masked))
    dy, dx = divmod(flat, window.shape[1])
    return float(masked.flat[flat]), (slices[1].start + dx, slices[0].start + dy)


def roi_max_array(values: np.ndarray, roi: CellBox) -> Tuple[float, Tuple[int, int]]:
    height, width = values.shape
    clipped = roi.clipped(width, height)
    if clipped is None:
        raise InvalidParameterError(f"roi {roi} lies outside the {width}x{height} map")
    window = values[clipped.slices]
    flat = int(np.argmax(window))
    dy, dx = divmod(flat, window.shape[1])
    return float(window.flat[flat]), (clipped.x0 + dx, clipped.y0 + dy)


def roi_max(saliency: SaliencyMap, roi: CellBox) -> Tuple[float, Tuple[int, int]]:
    """Max inside ``roi`` and its (x, y) cell; ties go to the topmost, then leftmost."""
    return roi_max_array(saliency.values, roi)


def line_profile(values: np.ndarray, orientation: Orientation) -> np.ndarray:
    """Max along every full-extent line: per column for vertical, per row for horizontal."""
    axis = 0 if orientation == Orientation.VERTICAL else 1
    return values.max(axis=axis)


def line_max(saliency: SaliencyMap, orientation: Orientation, position: int) -> float:
    orientation = Orientation(orientation)
    limit = saliency.width if orientation == Orientation.VERTICAL else saliency.height
    if not 0 <= position < limit:
        raise InvalidParameterError(f"{orientation.value} line position {position} outside [0, {limit})")
    if orientation == Orientation.VERTICAL:
        return float(saliency.values[:, position].max())
    return float(saliency.values[position, :].max())
