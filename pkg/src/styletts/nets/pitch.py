"""Recurrent pitch extractor (JDC-style convolutional front-end over mel
frequency bins followed by a bidirectional LSTM, per-frame Hz output)."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import LRELU_SLOPE
from .config import ModelConfig

F0_OUTPUT_SCALE = 100.0  # softplus head output in units of 100 Hz


class PitchExtractor(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        d = config.pitch_dim
        self.convs = nn.ModuleList(
            [
                nn.Conv2d(1, 32, 3, padding=1),
                nn.Conv2d(32, 32, 3, padding=1),
                nn.Conv2d(32, 64, 3, padding=1),
            ]
        )
        # pool frequency only; the time axis stays at the frame rate
        self.pools = nn.ModuleList(
            [nn.MaxPool2d((4, 1)), nn.MaxPool2d((4, 1)), nn.MaxPool2d((5, 1))]
        )
        freq_out = 64 * (config.n_mels // 80)  # 80 -> 20 -> 5 -> 1
        self.lstm = nn.LSTM(freq_out, d // 2, batch_first=True, bidirectional=True)
        self.head = nn.Linear(d, 1)

    def forward(self, mel: torch.Tensor) -> torch.Tensor:
        """mel: [n_mels x T] -> F0 in Hz, [T], non-negative."""
        x = mel.unsqueeze(0).unsqueeze(0)  # [1, 1, n_mels, T]
        for conv, pool in zip(self.convs, self.pools):
            x = pool(F.leaky_relu(conv(x), LRELU_SLOPE))
        x = x.flatten(1, 2).transpose(1, 2)  # [1, T, C]
        out, _ = self.lstm(x)
        f0 = F.softplus(self.head(out)).squeeze(0).squeeze(-1)
        return f0 * F0_OUTPUT_SCALE
