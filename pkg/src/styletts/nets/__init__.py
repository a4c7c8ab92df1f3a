"""Neural modules: encoders, aligner, pitch extractor, decoder, predictors."""

from .config import ModelConfig, StyleInjection, NetsError
from .blocks import (
    adain,
    adaln,
    adaptive_instance_norm,
    adaptive_layer_norm,
    AdaptiveNorm1d,
    ResBlk1d,
)
from .encoders import TextEncoder, StyleEncoder, Discriminator, DiscriminatorOutput
from .aligner import TextAligner
from .pitch import PitchExtractor
from .decoder import Decoder
from .predictors import PredictorNet

__all__ = [
    "ModelConfig",
    "StyleInjection",
    "NetsError",
    "adain",
    "adaln",
    "adaptive_instance_norm",
    "adaptive_layer_norm",
    "AdaptiveNorm1d",
    "ResBlk1d",
    "TextEncoder",
    "StyleEncoder",
    "Discriminator",
    "DiscriminatorOutput",
    "TextAligner",
    "PitchExtractor",
    "Decoder",
    "PredictorNet",
]
