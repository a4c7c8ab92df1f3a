"""Duration and prosody predictors with a shared style-conditioned encoder.

Structure per the published predictor table: a 3-layer bidirectional LSTM
prosody encoder with style concatenation and adaptive layer normalization,
a duration projection head, and a shared LSTM feeding pitch and energy
heads built from style-conditioned residual blocks.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import AdaptiveNorm1d, ResBlk1d
from .config import ModelConfig, NetsError, StyleInjection
from .pitch import F0_OUTPUT_SCALE


class PredictorNet(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        d = config.prosody_dim
        sd = config.style_dim
        td = config.text_dim
        mode = config.style_injection_mode
        # the prosody heads follow the decoder's style-injection ablation;
        # the prosody encoder always uses AdaLN (token-style normalization)
        head_mode = mode.value

        self.enc_lstms = nn.ModuleList()
        self.enc_norms = nn.ModuleList()
        in_dim = td
        for _ in range(3):
            self.enc_lstms.append(
                nn.LSTM(in_dim + sd, d // 2, batch_first=True, bidirectional=True)
            )
            self.enc_norms.append(AdaptiveNorm1d(sd, d, mode="adaln"))
            in_dim = d

        self.dur_lstm = nn.LSTM(d, d // 2, batch_first=True, bidirectional=True)
        self.dur_proj = nn.Linear(d, 1)

        self.shared_lstm = nn.LSTM(d + sd, d // 2, batch_first=True, bidirectional=True)
        narrow = max(d // 2, 1)
        self.pitch_blocks = nn.ModuleList(
            [
                ResBlk1d(d, d, style_dim=sd, norm=head_mode),
                ResBlk1d(d, narrow, style_dim=sd, norm=head_mode),
                ResBlk1d(narrow, narrow, style_dim=sd, norm=head_mode),
            ]
        )
        self.pitch_proj = nn.Conv1d(narrow, 1, 1)
        self.energy_blocks = nn.ModuleList(
            [
                ResBlk1d(d, d, style_dim=sd, norm=head_mode),
                ResBlk1d(d, narrow, style_dim=sd, norm=head_mode),
                ResBlk1d(narrow, narrow, style_dim=sd, norm=head_mode),
            ]
        )
        self.energy_proj = nn.Conv1d(narrow, 1, 1)

    def _style_or_none(self, s):
        if self.config.style_injection_mode is StyleInjection.IN:
            return None
        return s

    def prosody_encode(self, h_text: torch.Tensor, style: torch.Tensor) -> torch.Tensor:
        """h_text [text_dim x N], style [style_dim] -> h_prosody [prosody_dim x N]."""
        n = h_text.shape[-1]
        x = h_text
        for lstm, norm in zip(self.enc_lstms, self.enc_norms):
            sb = style.unsqueeze(-1).expand(style.shape[0], n)
            cat = torch.cat([x, sb], dim=0)  # [(C + sd) x N]
            out, _ = lstm(cat.T.unsqueeze(0))
            x = norm(out.squeeze(0).T, style)
        return x

    def duration_forward(self, h_text: torch.Tensor, style: torch.Tensor):
        """Returns (predicted frame counts [N], h_prosody [prosody_dim x N])."""
        h_prosody = self.prosody_encode(h_text, style)
        out, _ = self.dur_lstm(h_prosody.T.unsqueeze(0))
        durations = F.softplus(self.dur_proj(out)).squeeze(0).squeeze(-1)
        return durations, h_prosody

    def prosody_forward(
        self,
        h_prosody: torch.Tensor,
        alignment: torch.Tensor,
        style: torch.Tensor,
    ):
        """h_prosody [prosody_dim x N], alignment [N x T], style [style_dim]
        -> (pitch [T], energy [T])."""
        if h_prosody.shape[-1] != alignment.shape[0]:
            raise NetsError("h_prosody and alignment phoneme counts must match")
        t = alignment.shape[1]
        aligned = h_prosody @ alignment.to(h_prosody.dtype)  # [d x T]
        sb = style.unsqueeze(-1).expand(style.shape[0], t)
        cat = torch.cat([aligned, sb], dim=0)
        out, _ = self.shared_lstm(cat.T.unsqueeze(0))
        h = out.transpose(1, 2)  # [1, d, T]

        s = self._style_or_none(style)
        x = h
        for blk in self.pitch_blocks:
            x = blk(x, s)
        pitch = F.softplus(self.pitch_proj(x)).squeeze(0).squeeze(0) * F0_OUTPUT_SCALE

        x = h
        for blk in self.energy_blocks:
            x = blk(x, s)
        energy = self.energy_proj(x).squeeze(0).squeeze(0)
        return pitch, energy
