"""Seeded synthetic scenes: ground-truth boxes, encoded maps and corrupted maps."""

from __future__ import annotations

import logging
from typing import Iterator, List, Optional, Tuple

import numpy as np
from scipy import ndimage

from salientbox.config import EncoderConfig
from salientbox.encoder import box_to_gaussian_params, encode_gt, render_gaussian
from salientbox.errors import InfeasibleSceneError, InvalidParameterError
from salientbox.models import (
    BoundingBox,
    CellBox,
    GaussianParams,
    NoiseSpec,
    SaliencyMap,
    SceneSpec,
    SubitizingOutput,
)

logger = logging.getLogger(__name__)

MAX_OBJECTS = 6
DEFAULT_SIZE_RANGE = (1, 3)
DEFAULT_ATTEMPTS = 200
# per-box placement draws within one scene attempt
_PLACEMENT_DRAWS = 50
_RENDER_STREAM = 0x5A11


def roi_gap(a: CellBox, b: CellBox) -> int:
    """Empty cells between two ROIs along the axis where they are furthest apart."""
    gap_x = max(b.x0 - a.x1, a.x0 - b.x1) - 1
    gap_y = max(b.y0 - a.y1, a.y0 - b.y1) - 1
    return max(gap_x, gap_y)


def _draw_box(rng: np.random.Generator, cfg: EncoderConfig, size_range: Tuple[int, int]) -> Optional[BoundingBox]:
    # half-extents in cells; the box spans [mu - a, mu + a] on the cell lattice
    a_x = int(rng.integers(size_range[0], size_range[1] + 1))
    a_y = int(rng.integers(size_range[0], size_range[1] + 1))
    if 2 * a_x > cfg.map_width - 1 or 2 * a_y > cfg.map_height - 1:
        return None
    mu_x = int(rng.integers(a_x, cfg.map_width - a_x))
    mu_y = int(rng.integers(a_y, cfg.map_height - a_y))
    s = cfg.stride
    return BoundingBox(cx=mu_x * s, cy=mu_y * s, w=2 * a_x * s, h=2 * a_y * s)


def generate_scene(
    seed: int,
    k: int,
    min_separation_cells: int = 3,
    size_range: Tuple[int, int] = DEFAULT_SIZE_RANGE,
    cfg: Optional[EncoderConfig] = None,
    max_attempts: int = DEFAULT_ATTEMPTS,
    image: Optional[str] = None,
) -> SceneSpec:
    """Place ``k`` cell-aligned boxes whose ROIs keep ``min_separation_cells`` apart."""
    if not 0 <= k <= MAX_OBJECTS:
        raise InvalidParameterError(f"object count must lie in [0, {MAX_OBJECTS}], got {k}")
    if size_range[0] < 1 or size_range[1] < size_range[0]:
        raise InvalidParameterError(f"invalid half-extent range {size_range}")
    if min_separation_cells < 0:
        raise InvalidParameterError(f"separation must be nonnegative, got {min_separation_cells}")
    cfg = cfg or EncoderConfig()
    rng = np.random.default_rng(seed)

    for attempt in range(max_attempts):
        boxes: List[BoundingBox] = []
        rois: List[CellBox] = []
        for _ in range(k):
            placed = False
            for _ in range(_PLACEMENT_DRAWS):
                box = _draw_box(rng, cfg, size_range)
                if box is None:
                    break
                roi = box_to_gaussian_params(box, cfg).roi
                if all(roi_gap(roi, other) >= min_separation_cells for other in rois):
                    boxes.append(box)
                    rois.append(roi)
                    placed = True
                    break
            if not placed:
                break
        if len(boxes) == k:
            if attempt:
                logger.debug("scene %d packed after %d attempts", seed, attempt + 1)
            return SceneSpec(
                image=image or f"scene_{seed}",
                width=cfg.image_width,
                height=cfg.image_height,
                stride=cfg.stride,
                boxes=boxes,
                seed=seed,
            )
    raise InfeasibleSceneError(
        f"could not place {k} boxes {min_separation_cells} cells apart on a "
        f"{cfg.map_width}x{cfg.map_height} grid after {max_attempts} attempts"
    )


def scene_seed(seed: int, index: int) -> int:
    """Independent per-scene seed derived from a dataset seed."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def generate_dataset(
    seed: int,
    n: int,
    k_range: Tuple[int, int] = (1, 3),
    min_separation_cells: int = 3,
    size_range: Tuple[int, int] = DEFAULT_SIZE_RANGE,
    cfg: Optional[EncoderConfig] = None,
) -> Iterator[SceneSpec]:
    if n < 1:
        raise InvalidParameterError(f"scene count must be positive, got {n}")
    if not 0 <= k_range[0] <= k_range[1] <= MAX_OBJECTS:
        raise InvalidParameterError(f"invalid object count range {k_range}")
    width = len(str(n - 1))
    for index in range(n):
        derived = scene_seed(seed, index)
        k = k_range[0] + derived % (k_range[1] - k_range[0] + 1)
        yield generate_scene(
            derived,
            k,
            min_separation_cells=min_separation_cells,
            size_range=size_range,
            cfg=cfg,
            image=f"scene_{index:0{width}d}",
        )


def _encoder_config(scene: SceneSpec) -> EncoderConfig:
    return EncoderConfig(image_width=scene.width, image_height=scene.height, stride=scene.stride)


def _add_clutter(values: np.ndarray, rois: List[CellBox], noise: NoiseSpec, rng: np.random.Generator) -> int:
    radius = int(np.ceil(2.0 * noise.clutter_sigma_cells))
    occupied = np.zeros(values.shape, dtype=bool)
    for roi in rois:
        occupied[roi.slices] = True
    # a bump centered in the free set keeps its whole footprint off every ROI
    footprint = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
    free = np.argwhere(~ndimage.binary_dilation(occupied, structure=footprint)) if rois else np.argwhere(~occupied)
    if len(free) == 0:
        logger.warning("no room for clutter outside the object ROIs; skipping %d blobs", noise.clutter_blobs)
        return 0

    height, width = values.shape
    for _ in range(noise.clutter_blobs):
        y, x = (int(v) for v in free[rng.integers(len(free))])
        roi = CellBox(x - radius, y - radius, x + radius, y + radius).clipped(width, height)
        bump = np.zeros_like(values)
        params = GaussianParams(mu=(x, y), axis_sigma=(noise.clutter_sigma_cells,) * 2, roi=roi)
        render_gaussian(bump, params, amplitude=noise.clutter_amplitude)
        # overlapping bumps never stack past the clutter amplitude
        np.maximum(values, bump, out=values)
    return noise.clutter_blobs


def render_scene(scene: SceneSpec, noise: Optional[NoiseSpec] = None) -> SaliencyMap:
    """Encoded ground truth plus sub-threshold clutter and additive noise, clamped to [0, 1]."""
    cfg = _encoder_config(scene)
    clean = encode_gt(scene.boxes, cfg)
    if noise is None or noise.is_clean:
        return clean

    rng = np.random.default_rng([scene.seed, _RENDER_STREAM])
    values = clean.values.copy()
    if noise.clutter_blobs:
        rois = [box_to_gaussian_params(box, cfg).roi for box in scene.boxes]
        _add_clutter(values, rois, noise, rng)
    if noise.additive_sigma > 0:
        values += rng.normal(0.0, noise.additive_sigma, values.shape)
    np.clip(values, 0.0, 1.0, out=values)
    return SaliencyMap(values)


def oracle_subitizing(scene: SceneSpec) -> SubitizingOutput:
    """Exact subitizing output for a synthetic scene."""
    return SubitizingOutput(category=scene.count_category, confidence=1.0)
