"""Training objectives for both stages, with the published lambda weights."""

from __future__ import annotations

import dataclasses

import torch
import torch.nn.functional as F

LOGIT_CLAMP = 30.0


class LossError(Exception):
    pass


@dataclasses.dataclass
class HyperParams:
    lambda_s2s: float = 0.2
    lambda_mono: float = 5.0
    lambda_adv: float = 1.0
    lambda_fm: float = 0.2
    lambda_dur: float = 1.0
    lambda_f0: float = 0.1
    lambda_n: float = 1.0

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if getattr(self, f.name) < 0:
                raise LossError(f"{f.name} must be non-negative")


@dataclasses.dataclass
class LossReport:
    mel: float = 0.0
    s2s: float = 0.0
    mono: float = 0.0
    adv_d: float = 0.0
    adv_g: float = 0.0
    fm: float = 0.0
    dur: float = 0.0
    f0: float = 0.0
    energy: float = 0.0
    de: float = 0.0
    total: float = 0.0

    CSV_HEADER = "step,mel,s2s,mono,adv_d,adv_g,fm,dur,f0,energy,de,total"
    FIELDS = ("mel", "s2s", "mono", "adv_d", "adv_g", "fm", "dur", "f0", "energy",
              "de", "total")

    def csv_row(self, step: int) -> str:
        vals = ",".join(f"{getattr(self, f):.6f}" for f in self.FIELDS)
        return f"{step},{vals}"

    def finite(self) -> bool:
        import math

        return all(math.isfinite(getattr(self, f)) for f in self.FIELDS)

    def nonfinite_components(self) -> list[str]:
        import math

        return [f for f in self.FIELDS if not math.isfinite(getattr(self, f))]


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float32)


def mel_loss(x, x_hat) -> torch.Tensor:
    """Mean absolute difference over all mel cells."""
    x, x_hat = _as_tensor(x), _as_tensor(x_hat)
    if x.shape != x_hat.shape:
        raise LossError(f"mel shape mismatch: {tuple(x.shape)} vs {tuple(x_hat.shape)}")
    return (x - x_hat).abs().mean()


def s2s_loss(logits, targets) -> torch.Tensor:
    """Mean token cross-entropy over the phoneme sequence."""
    logits = _as_tensor(logits)
    targets = torch.as_tensor(targets, dtype=torch.long)
    if logits.shape[0] != targets.shape[0]:
        raise LossError("logit and target lengths differ")
    return F.cross_entropy(logits, targets, reduction="mean")


def mono_loss(soft_weights, hard_path) -> torch.Tensor:
    """L1 between soft attention and its (constant) monotonic hard target."""
    soft = _as_tensor(soft_weights)
    hard = _as_tensor(hard_path).detach()
    if soft.shape != hard.shape:
        raise LossError("alignment shape mismatch")
    return (soft - hard).abs().mean()


def adv_losses(real_logit, fake_logit):
    """(discriminator loss, generator loss); original min-max cross-entropy.

    The generator minimizes log(1 - s(f)), the saturating form: once the
    discriminator wins confidently the generator gradient vanishes and the
    reconstruction terms dominate, instead of an unbounded adversarial push.
    """
    real = _as_tensor(real_logit).clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
    fake = _as_tensor(fake_logit).clamp(-LOGIT_CLAMP, LOGIT_CLAMP)
    d_loss = F.softplus(-real) + F.softplus(fake)  # -log s(r) - log(1 - s(f))
    g_loss = -F.softplus(fake)  # log(1 - s(f))
    return d_loss, g_loss


def fm_loss(real_features, fake_features) -> torch.Tensor:
    """Sum over layers of per-element-normalized L1 feature distances."""
    if len(real_features) != len(fake_features):
        raise LossError("feature list length mismatch")
    total = None
    for r, f in zip(real_features, fake_features):
        r, f = _as_tensor(r), _as_tensor(f)
        if r.shape != f.shape:
            raise LossError("feature map shape mismatch")
        term = (r.detach() - f).abs().sum() / r.numel()
        total = term if total is None else total + term
    if total is None:
        raise LossError("empty feature lists")
    return total


def stage1_total(mel, s2s, mono, adv_g, fm, hp: HyperParams) -> torch.Tensor:
    return (
        _as_tensor(mel)
        + hp.lambda_s2s * _as_tensor(s2s)
        + hp.lambda_mono * _as_tensor(mono)
        + hp.lambda_adv * _as_tensor(adv_g)
        + hp.lambda_fm * _as_tensor(fm)
    )


def dur_loss(d_true, d_pred) -> torch.Tensor:
    """L1 over per-phoneme frame counts."""
    d_true = _as_tensor(d_true).to(torch.float32)
    d_pred = _as_tensor(d_pred)
    if d_true.shape != d_pred.shape:
        raise LossError("duration length mismatch")
    return (d_true - d_pred).abs().mean()


def f0_energy_losses(p_target, n_target, p_pred, n_pred):
    """Per-curve mean absolute error for pitch and energy."""
    p_target, p_pred = _as_tensor(p_target), _as_tensor(p_pred)
    n_target, n_pred = _as_tensor(n_target), _as_tensor(n_pred)
    if p_target.shape != p_pred.shape or n_target.shape != n_pred.shape:
        raise LossError("prosody curve length mismatch")
    return (p_target - p_pred).abs().mean(), (n_target - n_pred).abs().mean()


def decoder_recon_loss(x_gt_prosody, x_pred_prosody) -> torch.Tensor:
    """L1 between decoder outputs under ground-truth vs predicted prosody.

    The ground-truth branch is treated as a constant target; gradients reach
    only the prediction branch.
    """
    gt = _as_tensor(x_gt_prosody).detach()
    pred = _as_tensor(x_pred_prosody)
    if gt.shape != pred.shape:
        raise LossError("decoder output shape mismatch")
    return (gt - pred).abs().mean()


def stage2_total(de, dur, f0, energy, hp: HyperParams) -> torch.Tensor:
    return (
        _as_tensor(de)
        + hp.lambda_dur * _as_tensor(dur)
        + hp.lambda_f0 * _as_tensor(f0)
        + hp.lambda_n * _as_tensor(energy)
    )
