from __future__ import annotations

import numpy as np
import pytest

from salientbox.config import DecoderConfig, EncoderConfig
from salientbox.models import BoundingBox, SceneSpec


@pytest.fixture
def encoder_config() -> EncoderConfig:
    return EncoderConfig(image_width=224, image_height=224, stride=16)


@pytest.fixture
def native_decoder() -> DecoderConfig:
    """Cell-resolution decoding without smoothing, for hand-traceable cases."""
    return DecoderConfig(decode_resolution="native", smooth_sigma=0.0)


@pytest.fixture
def upsampled_decoder() -> DecoderConfig:
    return DecoderConfig.for_profile(224)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def centered_box() -> BoundingBox:
    # mu = (7, 7), axis sigma = (2, 2), ROI cells 5..9 on a 14x14 map
    return BoundingBox(cx=112, cy=112, w=64, h=64)


@pytest.fixture
def single_box_scene(centered_box: BoundingBox) -> SceneSpec:
    return SceneSpec(image="single", width=224, height=224, stride=16, boxes=[centered_box], seed=1)


@pytest.fixture
def workspace(tmp_path):
    for name in ("annotations", "maps", "detections", "reports"):
        (tmp_path / name).mkdir()
    return tmp_path
