from salientbox.config import DecoderConfig, EncoderConfig, LossConfig, SizeStrata, ToolkitConfig
from salientbox.decoder import BoxDecoder, detect
from salientbox.encoder import encode_gt
from salientbox.errors import (
    DegenerateBoxError,
    FormatError,
    InfeasibleSceneError,
    InvalidParameterError,
    NoSeparatorError,
    SalientBoxError,
)
from salientbox.models import (
    BoundingBox,
    CountCategory,
    DetectionResult,
    SaliencyMap,
    ScoredBox,
    SubitizingOutput,
)
from salientbox.pipeline import Pipeline
from salientbox.policy import GateDecision, SubitizingGate

__all__ = [
    "BoxDecoder",
    "detect",
    "encode_gt",
    "Pipeline",
    "DecoderConfig",
    "EncoderConfig",
    "LossConfig",
    "SizeStrata",
    "ToolkitConfig",
    "BoundingBox",
    "CountCategory",
    "DetectionResult",
    "SaliencyMap",
    "ScoredBox",
    "SubitizingOutput",
    "GateDecision",
    "SubitizingGate",
    "SalientBoxError",
    "InvalidParameterError",
    "DegenerateBoxError",
    "NoSeparatorError",
    "InfeasibleSceneError",
    "FormatError",
]
