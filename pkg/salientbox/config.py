from __future__ import annotations

import math
import os
from typing import List, Literal, Optional, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

from salientbox.errors import InvalidParameterError

PROFILES = {
    # input side (px), smoothing sigma in upsampled pixels
    224: {"image_size": 224, "smooth_sigma": 2.0},
    448: {"image_size": 448, "smooth_sigma": 10.0},
}
DEFAULT_STRIDE = 16


def profile_settings(profile: int) -> dict:
    try:
        return PROFILES[int(profile)]
    except (KeyError, ValueError) as exc:
        raise InvalidParameterError(f"unknown profile {profile!r}; expected one of {sorted(PROFILES)}") from exc


class EncoderConfig(BaseModel):
    """Input image geometry and network stride."""

    image_width: int = Field(default=224, gt=0)
    image_height: int = Field(default=224, gt=0)
    stride: int = Field(default=DEFAULT_STRIDE, gt=0)

    @model_validator(mode="after")
    def _map_not_empty(self) -> "EncoderConfig":
        if self.image_width // self.stride < 1 or self.image_height // self.stride < 1:
            raise ValueError("image is smaller than one map cell at this stride")
        return self

    @property
    def map_width(self) -> int:
        return self.image_width // self.stride

    @property
    def map_height(self) -> int:
        return self.image_height // self.stride

    @classmethod
    def for_profile(cls, profile: int, stride: int = DEFAULT_STRIDE) -> "EncoderConfig":
        size = profile_settings(profile)["image_size"]
        return cls(image_width=size, image_height=size, stride=stride)


class DecoderConfig(BaseModel):
    """Thresholds and resolution settings for box decoding."""

    theta_c: float = 0.7
    peak_thresholds: List[float] = Field(default_factory=lambda: [0.95, 0.9, 0.8, 0.6])
    smooth_sigma: float = Field(default=2.0, ge=0.0)
    decode_resolution: Literal["native", "upsampled"] = "upsampled"
    # (width, height); None means map size times stride
    upsample_size: Optional[Tuple[int, int]] = None
    stride: int = Field(default=DEFAULT_STRIDE, gt=0)
    box_rescale: bool = False
    register_lattice: bool = True

    @field_validator("theta_c")
    @classmethod
    def _open_unit_interval(cls, value: float) -> float:
        if not 0.0 < value < 1.0:
            raise ValueError("theta_c must lie in (0, 1)")
        return value

    @field_validator("peak_thresholds")
    @classmethod
    def _strictly_descending(cls, values: List[float]) -> List[float]:
        if not values:
            raise ValueError("at least one peak threshold is required")
        if any(not 0.0 < v < 1.0 for v in values):
            raise ValueError("peak thresholds must lie in (0, 1)")
        if any(b >= a for a, b in zip(values, values[1:])):
            raise ValueError("peak thresholds must be strictly descending")
        return values

    @field_validator("upsample_size")
    @classmethod
    def _positive_size(cls, value):
        if value is not None and (value[0] < 1 or value[1] < 1):
            raise ValueError("upsample size must be positive")
        return value

    @property
    def rescale_factor(self) -> float:
        """Reciprocal of the theta_c level-set radius in units of sigma."""
        return 1.0 / math.sqrt(2.0 * math.log(1.0 / self.theta_c))

    def output_size(self, map_width: int, map_height: int) -> Tuple[int, int]:
        if self.upsample_size is not None:
            return self.upsample_size
        return map_width * self.stride, map_height * self.stride

    @classmethod
    def for_profile(cls, profile: int, **overrides) -> "DecoderConfig":
        settings = profile_settings(profile)
        size = settings["image_size"]
        values = {"smooth_sigma": settings["smooth_sigma"], "upsample_size": (size, size)}
        values.update(overrides)
        return cls(**values)


class LossConfig(BaseModel):
    alpha: float = Field(default=5.0, gt=0.0)
    lam: float = Field(default=0.25, ge=0.0)


class SizeStrata(BaseModel):
    """Area bands for small (strictly below) and large (strictly above) objects."""

    small_max_area: float = Field(default=75 * 75, gt=0)
    large_min_area: float = Field(default=200 * 200, gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "SizeStrata":
        if self.small_max_area >= self.large_min_area:
            raise ValueError("small band must end below the large band")
        return self

    @classmethod
    def msra(cls) -> "SizeStrata":
        return cls(small_max_area=125 * 125)

    def is_small(self, area: float) -> bool:
        return area < self.small_max_area

    def is_large(self, area: float) -> bool:
        return area > self.large_min_area


class ToolkitConfig(BaseModel):
    """System-wide settings for batch commands."""

    threads: int = Field(default_factory=lambda: max(1, min(8, os.cpu_count() or 1)), gt=0)
    profile: int = 224
    csv_precision: int = 6
    map_suffix: str = ".rsdmap"

    @field_validator("profile")
    @classmethod
    def _known_profile(cls, value: int) -> int:
        if value not in PROFILES:
            raise ValueError(f"profile must be one of {sorted(PROFILES)}")
        return value

    @classmethod
    def from_env(cls, **overrides) -> "ToolkitConfig":
        load_dotenv()
        values = {}
        raw = os.environ.get("RSD_THREADS")
        if raw:
            try:
                values["threads"] = int(raw)
            except ValueError as exc:
                raise InvalidParameterError(f"RSD_THREADS must be a positive integer, got {raw!r}") from exc
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)
