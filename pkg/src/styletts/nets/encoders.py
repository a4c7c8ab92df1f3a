"""Text encoder, style encoder, and discriminator."""

from __future__ import annotations

import dataclasses

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import (
    LRELU_SLOPE,
    NORM_EPS,
    ResBlk2d,
    TimeCircularConv2d,
    adaptive_instance_norm,
    apply_spectral_norm,
)
from .config import ModelConfig, NetsError

MEL_LOG_FLOOR = -11.512925464970229  # log(1e-5)
MIN_STYLE_FRAMES = 80  # the time-pooling path divides T by 80

# layers of the style-encoder stack that emit a feature map:
# conv1x1, four ResBlks, the 5x5 conv, and the pooled vector
N_FEATURE_LAYERS = 7


class TextEncoder(nn.Module):
    """Phoneme ids -> hidden representation [text_dim x N].

    3 convolution layers followed by a bidirectional LSTM.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.text_dim
        self.vocab_size = config.vocab_size
        self.embedding = nn.Embedding(config.vocab_size, d)
        self.convs = nn.ModuleList(
            [nn.Conv1d(d, d, 5, padding=2) for _ in range(3)]
        )
        self.lstm = nn.LSTM(d, d // 2, batch_first=True, bidirectional=True)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """ids: [N] int64 -> [text_dim x N] (unbatched)."""
        if ids.ndim != 1 or ids.numel() < 1:
            raise NetsError("phoneme id sequence must be a non-empty vector")
        if torch.any(ids < 0) or torch.any(ids >= self.vocab_size):
            raise NetsError("phoneme id out of vocabulary")
        x = self.embedding(ids).T.unsqueeze(0)  # [1, d, N]
        one = x.new_ones(())
        zero = x.new_zeros(())
        for conv in self.convs:
            # instance normalization; the eps guard keeps N = 1 well defined
            x = F.leaky_relu(
                adaptive_instance_norm(conv(x), one, zero), LRELU_SLOPE
            )
        out, _ = self.lstm(x.transpose(1, 2))
        return out.squeeze(0).T  # [d, N]


def _pad_mel(mel: torch.Tensor, min_frames: int = MIN_STYLE_FRAMES) -> torch.Tensor:
    """Right-pad short mels with the log floor so T/80 pooling is defined."""
    t = mel.shape[-1]
    if t >= min_frames:
        return mel
    return F.pad(mel, (0, min_frames - t), value=MEL_LOG_FLOOR)


class _StyleStack(nn.Module):
    """Shared trunk of the style encoder and the discriminator."""

    def __init__(self, config: ModelConfig, out_dim: int):
        super().__init__()
        b = config.style_enc_base
        cap = config.style_enc_max
        widths = [min(b * 2**i, cap) for i in range(5)]  # 64,128,256,512,512
        self.conv_in = nn.Conv2d(1, widths[0], 1)
        self.blocks = nn.ModuleList(
            [ResBlk2d(widths[i], widths[i + 1]) for i in range(4)]
        )
        self.conv_out = TimeCircularConv2d(
            widths[4], widths[4], 5, stride=(1, 5), padding=(0, 2)
        )
        self.linear = nn.Linear(widths[4], out_dim)
        apply_spectral_norm(self)

    def forward(self, mel: torch.Tensor):
        """mel: [n_mels x T] -> (output [out_dim], feature maps)."""
        if mel.ndim != 2:
            raise NetsError("style stack expects an [n_mels x T] matrix")
        x = _pad_mel(mel).unsqueeze(0).unsqueeze(0)  # [1, 1, n_mels, T]
        feats = []
        x = self.conv_in(x)
        feats.append(x)
        for blk in self.blocks:
            x = blk(x)
            feats.append(x)
        x = F.leaky_relu(x, LRELU_SLOPE)
        x = self.conv_out(x)
        feats.append(x)
        x = F.leaky_relu(x, LRELU_SLOPE)
        pooled = F.adaptive_avg_pool2d(x, 1).flatten(1)  # [1, C]
        feats.append(pooled)
        out = self.linear(pooled).squeeze(0)
        return out, feats


class StyleEncoder(nn.Module):
    """Reference mel -> style vector of width ``style_dim``."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.stack = _StyleStack(config, config.style_dim)

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        out, _ = self.stack(mel)
        return out


@dataclasses.dataclass
class DiscriminatorOutput:
    logit: torch.Tensor
    feature_maps: list


class Discriminator(nn.Module):
    """Same trunk as the style encoder with a scalar head; exposes per-layer
    feature maps for the feature-matching loss."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.stack = _StyleStack(config, 1)

    def forward(self, mel: torch.Tensor) -> DiscriminatorOutput:
        out, feats = self.stack(mel)
        return DiscriminatorOutput(logit=out.squeeze(), feature_maps=feats)
