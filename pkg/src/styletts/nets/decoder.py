"""Mel decoder: aligned phonemes + style + pitch + energy -> mel.

Layout follows the published decoder table: small processing submodules for
F0, energy, and the phoneme residual; two wide instance-norm residual
blocks; then style-conditioned residual blocks with re-concatenation of the
processed pitch, energy, and residual features at the first three blocks;
a final 1x1 convolution produces the mel. All convolution and linear
weights carry weight normalization.
"""

from __future__ import annotations

import torch
import torch.nn as nn

from .blocks import ResBlk1d, apply_weight_norm
from .config import ModelConfig, NetsError, StyleInjection


class Decoder(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        wide = config.decoder_wide
        narrow = config.decoder_narrow
        res = config.residual_dim
        sd = config.style_dim
        mode = config.style_injection_mode.value

        self.f0_block = ResBlk1d(1, res, norm="none")
        self.f0_out = nn.Conv1d(res, 1, 1)
        self.f0_norm = nn.InstanceNorm1d(1, affine=False)
        self.energy_block = ResBlk1d(1, res, norm="none")
        self.energy_out = nn.Conv1d(res, 1, 1)
        self.energy_norm = nn.InstanceNorm1d(1, affine=False)
        self.res_proj = nn.Conv1d(config.text_dim, res, 1)
        self.res_norm = nn.InstanceNorm1d(res, affine=False)

        extra = 2 + (res if config.use_residual_features else 0)
        self.in_block1 = ResBlk1d(config.text_dim + 2, wide, norm="in")
        self.in_block2 = ResBlk1d(wide, wide, norm="in")
        self.style_blocks = nn.ModuleList(
            [
                ResBlk1d(wide + extra, wide, style_dim=sd, norm=mode),
                ResBlk1d(wide + extra, wide, style_dim=sd, norm=mode),
                ResBlk1d(wide + extra, narrow, style_dim=sd, norm=mode),
                ResBlk1d(narrow, narrow, style_dim=sd, norm=mode),
                ResBlk1d(narrow, narrow, style_dim=sd, norm=mode),
            ]
        )
        self.conv_out = nn.Conv1d(narrow, config.n_mels, 1)
        apply_weight_norm(self)

    def forward(
        self,
        aligned_text: torch.Tensor,
        style: torch.Tensor,
        pitch: torch.Tensor,
        energy: torch.Tensor,
    ) -> torch.Tensor:
        """aligned_text [text_dim x T], style [style_dim], pitch/energy [T]
        -> mel [n_mels x T]."""
        t = aligned_text.shape[-1]
        if pitch.shape[-1] != t or energy.shape[-1] != t:
            raise NetsError("aligned text, pitch, and energy lengths must match")

        needs_style = self.config.style_injection_mode is not StyleInjection.IN
        if needs_style and style is None:
            raise NetsError("style vector required")
        s = None if self.config.style_injection_mode is StyleInjection.IN else style

        p = pitch.reshape(1, 1, t)
        n = energy.reshape(1, 1, t)
        h = aligned_text.unsqueeze(0)

        p_proc = self.f0_norm(self.f0_out(self.f0_block(p)))
        n_proc = self.energy_norm(self.energy_out(self.energy_block(n)))
        h_res = self.res_norm(self.res_proj(h))

        x = torch.cat([h, p_proc, n_proc], dim=1)
        x = self.in_block1(x)
        x = self.in_block2(x)
        for i, blk in enumerate(self.style_blocks):
            if i < 3:
                parts = [x, p_proc, n_proc]
                if self.config.use_residual_features:
                    parts.append(h_res)
                x = torch.cat(parts, dim=1)
            x = blk(x, s)
        return self.conv_out(x).squeeze(0)
