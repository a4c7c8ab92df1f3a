"""Normalization primitives and residual blocks shared across the networks."""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .config import NetsError, StyleInjection

NORM_EPS = 1e-5
LRELU_SLOPE = 0.2


def adaptive_instance_norm(
    x: torch.Tensor, gain: torch.Tensor, bias: torch.Tensor, eps: float = NORM_EPS
) -> torch.Tensor:
    """gain * (x - mu) / (sigma + eps) + bias, statistics over the time axis
    per channel. ``x`` is [C, T] or [B, C, T]; gain/bias broadcast per channel."""
    mu = x.mean(dim=-1, keepdim=True)
    sigma = x.std(dim=-1, unbiased=False, keepdim=True)
    return gain * (x - mu) / (sigma + eps) + bias


def adaptive_layer_norm(
    x: torch.Tensor, gain: torch.Tensor, bias: torch.Tensor, eps: float = NORM_EPS
) -> torch.Tensor:
    """As adaptive_instance_norm but with statistics over the whole feature
    map (all channels and positions); a single gain/bias pair."""
    dims = (-2, -1)
    mu = x.mean(dim=dims, keepdim=True)
    sigma = x.std(dim=dims, unbiased=False, keepdim=True)
    return gain * (x - mu) / (sigma + eps) + bias


def adain(feature_map: torch.Tensor, style: torch.Tensor, projections: nn.Linear,
          eps: float = NORM_EPS) -> torch.Tensor:
    """Style-adaptive instance normalization of a [C x T] feature map.

    ``projections`` maps the style vector to 2C values: C gains then C biases.
    """
    c = feature_map.shape[-2]
    h = projections(style)
    gain, bias = h[..., :c], h[..., c:]
    return adaptive_instance_norm(
        feature_map, gain.unsqueeze(-1), bias.unsqueeze(-1), eps
    )


def adaln(feature_map: torch.Tensor, style: torch.Tensor, projections: nn.Linear,
          eps: float = NORM_EPS) -> torch.Tensor:
    """Layer-normalized variant: one gain/bias pair for the whole map."""
    h = projections(style)
    gain, bias = h[..., 0:1], h[..., 1:2]
    return adaptive_layer_norm(
        feature_map, gain.unsqueeze(-1), bias.unsqueeze(-1), eps
    )


class AdaptiveNorm1d(nn.Module):
    """Normalization with style-predicted gain/bias.

    mode "adain": per-channel time statistics, C gain/bias pairs.
    mode "adaln": whole-map statistics, one gain/bias pair.
    mode "in":    plain instance normalization (gain 1, bias 0, no params).
    """

    def __init__(self, style_dim: int, channels: int, mode: str = "adain"):
        super().__init__()
        self.mode = StyleInjection(mode)
        self.channels = channels
        if self.mode is StyleInjection.ADAIN:
            self.fc = nn.Linear(style_dim, 2 * channels)
        elif self.mode is StyleInjection.ADALN:
            self.fc = nn.Linear(style_dim, 2)
        elif self.mode is StyleInjection.IN:
            self.fc = None
        else:
            raise NetsError("AdaptiveNorm1d supports adain/adaln/in")
        if self.fc is not None:
            # near-identity transform at init: gain ~1, bias ~0. The weight
            # stays tiny but nonzero so norm-based reparametrizations of it
            # are well defined.
            nn.init.normal_(self.fc.weight, std=1e-4)
            with torch.no_grad():
                half = self.fc.bias.shape[0] // 2
                self.fc.bias[:half] = 1.0
                self.fc.bias[half:] = 0.0

    def forward(self, x: torch.Tensor, s: torch.Tensor | None) -> torch.Tensor:
        if self.mode is StyleInjection.IN:
            return adaptive_instance_norm(
                x, x.new_ones(()), x.new_zeros(())
            )
        if s is None:
            raise NetsError("style vector required for adaptive normalization")
        if self.mode is StyleInjection.ADAIN:
            return adain(x, s, self.fc)
        return adaln(x, s, self.fc)


class ResBlk1d(nn.Module):
    """Pre-activation 1-D residual block.

    norm: "none" | "in" | "adain" | "adaln" | "concat".
    "concat" uses plain instance normalization and concatenates the
    broadcast style vector to the block input channels.
    """

    def __init__(
        self,
        in_ch: int,
        out_ch: int,
        style_dim: int = 0,
        norm: str = "none",
        kernel: int = 3,
    ):
        super().__init__()
        self.norm_kind = norm
        self.in_ch = in_ch
        self.out_ch = out_ch
        self.style_dim = style_dim
        pad = kernel // 2

        conv_in = in_ch
        if norm == "concat":
            conv_in = in_ch + style_dim
        self.norm1 = self._make_norm(in_ch)
        self.norm2 = self._make_norm(out_ch)
        self.conv1 = nn.Conv1d(conv_in, out_ch, kernel, padding=pad)
        self.conv2 = nn.Conv1d(out_ch, out_ch, kernel, padding=pad)
        self.skip = nn.Conv1d(in_ch, out_ch, 1) if in_ch != out_ch else None

    def _make_norm(self, channels):
        if self.norm_kind == "none":
            return None
        if self.norm_kind in ("in", "concat"):
            return AdaptiveNorm1d(self.style_dim, channels, mode="in")
        return AdaptiveNorm1d(self.style_dim, channels, mode=self.norm_kind)

    def _apply_norm(self, norm, x, s):
        if norm is None:
            return x
        if self.norm_kind in ("in", "concat"):
            return norm(x, None)
        return norm(x, s)

    def forward(self, x: torch.Tensor, s: torch.Tensor | None = None) -> torch.Tensor:
        h = self._apply_norm(self.norm1, x, s)
        h = F.leaky_relu(h, LRELU_SLOPE)
        if self.norm_kind == "concat":
            if s is None:
                raise NetsError("concat mode requires a style vector")
            sb = s.unsqueeze(-1).expand(*s.shape, x.shape[-1])
            while sb.ndim < h.ndim:
                sb = sb.unsqueeze(0)
            sb = sb.expand(*h.shape[:-2], *sb.shape[-2:])
            h = torch.cat([h, sb], dim=-2)
        h = self.conv1(h)
        h = self._apply_norm(self.norm2, h, s)
        h = F.leaky_relu(h, LRELU_SLOPE)
        h = self.conv2(h)
        res = x if self.skip is None else self.skip(x)
        return h + res


class TimeCircularConv2d(nn.Conv2d):
    """Conv2d over [B, C, freq, time] with zero padding on the frequency axis
    and circular padding on the time axis, so a time-periodic input yields a
    time-periodic feature map (global average pooling is then invariant to
    repetition along time)."""

    def __init__(self, in_ch, out_ch, kernel, stride=1, padding=0):
        if isinstance(padding, int):
            padding = (padding, padding)
        self._time_pad = padding[1]
        super().__init__(in_ch, out_ch, kernel, stride=stride,
                         padding=(padding[0], 0))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self._time_pad:
            x = F.pad(x, (self._time_pad, self._time_pad, 0, 0), mode="circular")
        return super().forward(x)


class ResBlk2d(nn.Module):
    """2-D residual block with learned stride-2 pooling (style encoder and
    discriminator). No normalization, per the architecture table."""

    def __init__(self, in_ch: int, out_ch: int):
        super().__init__()
        self.conv1 = TimeCircularConv2d(in_ch, out_ch, 3, padding=1)
        self.pool = TimeCircularConv2d(out_ch, out_ch, 3, stride=2, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.leaky_relu(x, LRELU_SLOPE))
        h = self.pool(F.leaky_relu(h, LRELU_SLOPE))
        res = F.avg_pool2d(self.skip(x), 2, ceil_mode=True)
        return h + res


def weight_parametrized_modules(module: nn.Module):
    """Yield submodules carrying a learnable ``weight`` tensor (convs, linears)."""
    for m in module.modules():
        if isinstance(m, (nn.Conv1d, nn.Conv2d, nn.Linear)):
            yield m


def apply_weight_norm(module: nn.Module) -> None:
    for m in weight_parametrized_modules(module):
        nn.utils.parametrizations.weight_norm(m)


def apply_spectral_norm(module: nn.Module) -> None:
    for m in weight_parametrized_modules(module):
        nn.utils.parametrizations.spectral_norm(m)
