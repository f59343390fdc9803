from __future__ import annotations

import math
from typing import Iterable

import numpy as np

from salientbox.config import EncoderConfig
from salientbox.errors import DegenerateBoxError, InvalidParameterError
from salientbox.models import BoundingBox, CellBox, GaussianParams, SaliencyMap


def box_to_gaussian_params(box: BoundingBox, cfg: EncoderConfig) -> GaussianParams:
    """Mean, per-axis sigma and truncation ROI of one box, in map cells."""
    if not box.within(cfg.image_width, cfg.image_height):
        raise InvalidParameterError(f"box {box.corners()} lies outside the {cfg.image_width}x{cfg.image_height} image")
    s = cfg.stride
    cells_w = math.floor(box.w / s)
    cells_h = math.floor(box.h / s)
    if cells_w < 1 or cells_h < 1:
        raise DegenerateBoxError(f"box {box.w}x{box.h} px spans zero cells at stride {s}")

    last_x, last_y = cfg.map_width - 1, cfg.map_height - 1
    mu_x = min(math.floor(box.cx / s), last_x)
    mu_y = min(math.floor(box.cy / s), last_y)
    # the ROI always covers mu so the mean keeps value 1
    roi = CellBox(
        x0=min(max(math.ceil(box.x0 / s), 0), mu_x),
        y0=min(max(math.ceil(box.y0 / s), 0), mu_y),
        x1=max(min(math.floor(box.x1 / s), last_x), mu_x),
        y1=max(min(math.floor(box.y1 / s), last_y), mu_y),
    )
    return GaussianParams(mu=(mu_x, mu_y), axis_sigma=(cells_w / 2.0, cells_h / 2.0), roi=roi)


def render_gaussian(values: np.ndarray, params: GaussianParams, amplitude: float = 1.0) -> None:
    """Add one truncated Gaussian into ``values`` in place."""
    roi = params.roi
    xs = np.arange(roi.x0, roi.x1 + 1, dtype=np.float64)
    ys = np.arange(roi.y0, roi.y1 + 1, dtype=np.float64)
    sx, sy = params.axis_sigma
    gx = np.exp(-0.5 * ((xs - params.mu[0]) / sx) ** 2)
    gy = np.exp(-0.5 * ((ys - params.mu[1]) / sy) ** 2)
    values[roi.slices] += amplitude * np.outer(gy, gx)


def encode_gt(boxes: Iterable[BoundingBox], cfg: EncoderConfig) -> SaliencyMap:
    """Truncated-Gaussian ground-truth map of size floor(W/s) x floor(H/s), clamped to 1."""
    values = np.zeros((cfg.map_height, cfg.map_width), dtype=np.float64)
    for params in [box_to_gaussian_params(box, cfg) for box in boxes]:
        render_gaussian(values, params)
    np.minimum(values, 1.0, out=values)
    return SaliencyMap(values)
