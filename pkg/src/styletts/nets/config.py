"""Model configuration: channel widths, style injection mode, ablation switches.

Defaults reproduce the published channel widths; :meth:`ModelConfig.toy`
shrinks every width by a common factor for desk-scale overfit runs.
"""

from __future__ import annotations

import dataclasses
import enum


class NetsError(Exception):
    pass


class StyleInjection(str, enum.Enum):
    ADAIN = "adain"
    ADALN = "adaln"
    CONCAT = "concat"
    IN = "in"


@dataclasses.dataclass
class ModelConfig:
    vocab_size: int = 64
    n_mels: int = 80

    # style injection / ablation switches
    style_injection_mode: StyleInjection = StyleInjection.ADAIN
    use_residual_features: bool = True
    use_discriminator: bool = True
    hard_ratio: float = 0.5

    # channel widths (defaults match the published architecture tables)
    text_dim: int = 512  # hidden phoneme representation width
    style_dim: int = 128  # style vector width
    decoder_wide: int = 1024  # wide decoder ResBlk width
    decoder_narrow: int = 512  # narrow decoder ResBlk width
    residual_dim: int = 64  # pitch/energy/residual submodule width
    style_enc_base: int = 64  # first style-encoder channel count
    style_enc_max: int = 512  # style-encoder channel cap
    aligner_dim: int = 256  # text-aligner hidden width
    pitch_dim: int = 256  # pitch-extractor hidden width
    prosody_dim: int = 512  # predictor LSTM output width

    def __post_init__(self):
        if isinstance(self.style_injection_mode, str):
            self.style_injection_mode = StyleInjection(self.style_injection_mode)
        if self.vocab_size < 1:
            raise NetsError("vocab_size must be >= 1")
        if not 0.0 <= self.hard_ratio <= 1.0:
            raise NetsError("hard_ratio must lie in [0, 1]")

    @classmethod
    def toy(cls, vocab_size: int, **overrides) -> "ModelConfig":
        """Small widths for fast CPU overfit experiments."""
        base = dict(
            vocab_size=vocab_size,
            text_dim=64,
            style_dim=16,
            decoder_wide=128,
            decoder_narrow=64,
            residual_dim=8,
            style_enc_base=8,
            style_enc_max=64,
            aligner_dim=64,
            pitch_dim=64,
            prosody_dim=64,
        )
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["style_injection_mode"] = self.style_injection_mode.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)
