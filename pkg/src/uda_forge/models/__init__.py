from .adapter import STRIDES, MultiScaleAdapter
from .decoder import BasicPyramid, PyramidDecoderConfig
from .encoder import EncoderConfig, TokenEncoder
from .network import (
    EXTERNAL_ENCODER,
    TOY_ENCODER,
    ModelConfig,
    SegmentationNetwork,
    build_network,
    load_checkpoint,
    save_checkpoint,
    save_encoder_checkpoint,
)

__all__ = [
    "STRIDES",
    "MultiScaleAdapter",
    "BasicPyramid",
    "PyramidDecoderConfig",
    "EncoderConfig",
    "TokenEncoder",
    "EXTERNAL_ENCODER",
    "TOY_ENCODER",
    "ModelConfig",
    "SegmentationNetwork",
    "build_network",
    "load_checkpoint",
    "save_checkpoint",
    "save_encoder_checkpoint",
]
