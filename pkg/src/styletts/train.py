"""Two-stage training: aligner/pitch pre-training, Stage 1 (acoustic modules
with mixed hard/soft alignments and adversarial terms), Stage 2 (duration and
prosody predictors over frozen Stage-1 modules).

All stochastic choices (batch order, segment crop offsets, time-stretch
scales, hard/soft branch selection) are derived from (seed, epoch/step) keys,
so a run is bit-reproducible and an interrupted run resumed from a checkpoint
matches the uninterrupted one.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path

import numpy as np
import torch

from . import alignment as align
from . import augment, checkpoint, corpus, dsp
from . import losses as L
from .losses import HyperParams, LossReport
from .nets import (
    Decoder,
    Discriminator,
    ModelConfig,
    PitchExtractor,
    PredictorNet,
    StyleEncoder,
    TextAligner,
    TextEncoder,
)

log = logging.getLogger(__name__)

STAGE1_MODULES = (
    "text_encoder",
    "aligner",
    "style_encoder",
    "pitch_extractor",
    "decoder",
    "discriminator",
)
ALL_MODULES = STAGE1_MODULES + ("predictor",)


class TrainError(Exception):
    pass


@dataclasses.dataclass
class TrainConfig:
    epochs: int = 2
    batch_size: int = 8
    lr: float = 1e-4
    beta1: float = 0.0
    beta2: float = 0.99
    weight_decay: float = 1e-4
    seed: int = 0
    hp: HyperParams = dataclasses.field(default_factory=HyperParams)
    model: ModelConfig | None = None
    hard_ratio: float = 0.5
    aug_range: tuple[float, float] = (0.75, 1.25)
    # ablation switches
    use_s2s: bool = True
    use_mono: bool = True
    use_pitch_extractor: bool = True
    use_pretrained_aligner: bool = True
    use_augmentation: bool = True
    # bookkeeping
    max_steps: int | None = None
    log_every: int = 10
    checkpoint_every: int = 0  # 0: only at the end

    def __post_init__(self):
        if self.batch_size < 1:
            raise TrainError("batch_size must be >= 1")
        if self.lr <= 0:
            raise TrainError("lr must be positive")


@dataclasses.dataclass
class Models:
    text_encoder: TextEncoder
    aligner: TextAligner
    style_encoder: StyleEncoder
    pitch_extractor: PitchExtractor
    decoder: Decoder
    discriminator: Discriminator
    predictor: PredictorNet

    @classmethod
    def build(cls, config: ModelConfig, seed: int = 0) -> "Models":
        torch.manual_seed(seed)
        return cls(
            text_encoder=TextEncoder(config),
            aligner=TextAligner(config),
            style_encoder=StyleEncoder(config),
            pitch_extractor=PitchExtractor(config),
            decoder=Decoder(config),
            discriminator=Discriminator(config),
            predictor=PredictorNet(config),
        )

    def as_dict(self) -> dict[str, torch.nn.Module]:
        return {name: getattr(self, name) for name in ALL_MODULES}

    def stage1_dict(self) -> dict[str, torch.nn.Module]:
        return {name: getattr(self, name) for name in STAGE1_MODULES}

    def generator_parameters(self):
        for name in ("text_encoder", "aligner", "style_encoder",
                     "pitch_extractor", "decoder"):
            yield from getattr(self, name).parameters()

    def freeze_stage1(self) -> None:
        for name in STAGE1_MODULES:
            module = getattr(self, name)
            module.requires_grad_(False)
            module.eval()


@dataclasses.dataclass
class TrainItem:
    utt_id: str
    speaker: str
    ids: np.ndarray      # [N] int64 symbol ids
    mel: np.ndarray      # [n_mels x T]
    pitch: np.ndarray    # [T] Hz, 0 = unvoiced
    energy: np.ndarray   # [T] log norm


def build_items(
    prepared: corpus.PrepareResult, table: dict[str, int]
) -> list[TrainItem]:
    items = []
    for cached in prepared.cached:
        mel, pitch, energy = cached.load()
        items.append(
            TrainItem(
                utt_id=cached.utterance.utt_id,
                speaker=cached.utterance.speaker,
                ids=corpus.encode_transcript(cached.utterance.transcript, table),
                mel=mel.astype(np.float64),
                pitch=pitch,
                energy=energy,
            )
        )
    if not items:
        raise TrainError("empty corpus: nothing to train on")
    return items


def make_optimizer(params, config: TrainConfig) -> torch.optim.AdamW:
    params = list(params)
    if not params:
        raise TrainError("optimizer over empty parameter list")
    return torch.optim.AdamW(
        params,
        lr=config.lr,
        betas=(config.beta1, config.beta2),
        weight_decay=config.weight_decay,
    )


def _rng(*key: int) -> np.random.Generator:
    return np.random.default_rng([k & 0x7FFFFFFF for k in key])


def _f(x) -> float:
    return float(x.detach()) if isinstance(x, torch.Tensor) else float(x)


def _check_finite(report: LossReport, stage: str) -> None:
    if not report.finite():
        bad = ", ".join(report.nonfinite_components())
        raise TrainError(f"{stage}: non-finite loss components: {bad}")


def _mel_tensor(item_mel: np.ndarray) -> torch.Tensor:
    return torch.as_tensor(item_mel, dtype=torch.float32)


def _stretch_contour(values: np.ndarray, t_new: int) -> np.ndarray:
    t = len(values)
    if t_new == 1 or t == 1:
        positions = np.zeros(t_new)
    else:
        positions = np.arange(t_new) * (t - 1) / (t_new - 1)
    return np.interp(positions, np.arange(t), values)


# ---------------------------------------------------------------------------
# Pre-training


def pretrain_aligner_step(batch, models: Models, optim, step: int) -> LossReport:
    optim.zero_grad()
    total = torch.zeros(())
    for item in batch:
        _, logits = models.aligner(_mel_tensor(item.mel), torch.as_tensor(item.ids))
        total = total + L.s2s_loss(logits, item.ids)
    total = total / len(batch)
    report = LossReport(s2s=_f(total), total=_f(total))
    _check_finite(report, "pretrain-aligner")
    total.backward()
    optim.step()
    return report


def pretrain_pitch_step(batch, models: Models, optim, step: int) -> LossReport:
    optim.zero_grad()
    total = torch.zeros(())
    n_used = 0
    for item in batch:
        voiced = torch.as_tensor(item.pitch > 0)
        if not bool(voiced.any()):
            continue
        pred = models.pitch_extractor(_mel_tensor(item.mel))
        target = torch.as_tensor(item.pitch, dtype=torch.float32)
        total = total + (pred[voiced] - target[voiced]).abs().mean()
        n_used += 1
    if n_used == 0:
        return LossReport()
    total = total / n_used
    report = LossReport(f0=_f(total), total=_f(total))
    _check_finite(report, "pretrain-pitch")
    total.backward()
    optim.step()
    return report


# ---------------------------------------------------------------------------
# Stage 1


def train_stage1_step(
    batch: list[TrainItem],
    models: Models,
    config: TrainConfig,
    opt_g: torch.optim.Optimizer,
    opt_d: torch.optim.Optimizer | None,
    step: int,
) -> LossReport:
    """One discriminator update then one generator update on the batch.

    The alignment branch (hard vs soft) is a per-batch deterministic coin
    flip; in the hard branch no gradient reaches the aligner through the
    decoder path. Mel targets are cropped to the shortest length in the
    batch at a seeded random offset per item.
    """
    policy = align.AlignmentMixPolicy(config.hard_ratio, config.seed)
    mode = align.mix_select(policy, step)
    use_disc = models.decoder.config.use_discriminator
    seg = min(item.mel.shape[1] for item in batch)

    per_item = []
    l_s2s, l_mono, l_mel = [], [], []
    for idx, item in enumerate(batch):
        mel_t = _mel_tensor(item.mel)
        ids_t = torch.as_tensor(item.ids)
        soft, logits = models.aligner(mel_t, ids_t)
        if config.use_s2s:
            l_s2s.append(L.s2s_loss(logits, item.ids))
        hard = align.monotonic_search(
            align.SoftAlignment(soft.detach().double().numpy())
        )
        if config.use_mono:
            l_mono.append(L.mono_loss(soft, torch.as_tensor(hard.path).float()))

        start = int(_rng(config.seed, step, idx).integers(
            0, item.mel.shape[1] - seg + 1))
        sl = slice(start, start + seg)
        if mode is align.AlignMode.HARD:
            a_crop = torch.as_tensor(hard.path[:, sl]).float()
        else:
            a_crop = soft[:, sl]
        h_text = models.text_encoder(ids_t)
        aligned = h_text @ a_crop

        if config.use_pitch_extractor:
            pitch = models.pitch_extractor(mel_t)[sl]
        else:
            pitch = torch.as_tensor(item.pitch[sl], dtype=torch.float32)
        energy = torch.as_tensor(item.energy[sl], dtype=torch.float32)

        mel_crop = mel_t[:, sl]
        style = models.style_encoder(mel_crop)
        x_hat = models.decoder(aligned, style, pitch, energy)
        l_mel.append(L.mel_loss(mel_crop, x_hat))
        per_item.append((mel_crop, x_hat))

    def _mean(terms):
        return sum(terms) / len(terms) if terms else torch.zeros(())

    adv_d = torch.zeros(())
    if use_disc and opt_d is not None:
        opt_d.zero_grad()
        d_terms = []
        for mel_crop, x_hat in per_item:
            real = models.discriminator(mel_crop).logit
            fake = models.discriminator(x_hat.detach()).logit
            d_loss, _ = L.adv_losses(real, fake)
            d_terms.append(d_loss)
        adv_d = _mean(d_terms)
        if not torch.isfinite(adv_d):
            raise TrainError("stage1: non-finite loss components: adv_d")
        adv_d.backward()
        opt_d.step()

    l_adv_g, l_fm = [], []
    if use_disc:
        for mel_crop, x_hat in per_item:
            real_out = models.discriminator(mel_crop)
            fake_out = models.discriminator(x_hat)
            _, g_loss = L.adv_losses(real_out.logit.detach(), fake_out.logit)
            l_adv_g.append(g_loss)
            l_fm.append(L.fm_loss(real_out.feature_maps, fake_out.feature_maps))

    mel_m, s2s_m = _mean(l_mel), _mean(l_s2s)
    mono_m, advg_m, fm_m = _mean(l_mono), _mean(l_adv_g), _mean(l_fm)
    total = L.stage1_total(mel_m, s2s_m, mono_m, advg_m, fm_m, config.hp)
    report = LossReport(
        mel=_f(mel_m), s2s=_f(s2s_m), mono=_f(mono_m),
        adv_d=_f(adv_d), adv_g=_f(advg_m), fm=_f(fm_m),
        total=_f(total),
    )
    _check_finite(report, "stage1")
    opt_g.zero_grad()
    total.backward()
    opt_g.step()
    return report


# ---------------------------------------------------------------------------
# Stage 2


def _extract_pitch_fn(models: Models, config: TrainConfig, item: TrainItem):
    """Mel -> PitchContour for augmented prosody targets."""
    if config.use_pitch_extractor:
        def fn(mel: dsp.MelSpectrogram) -> dsp.PitchContour:
            with torch.no_grad():
                f0 = models.pitch_extractor(_mel_tensor(mel.values)).numpy()
            f0 = np.asarray(f0, dtype=np.float64)
            return dsp.PitchContour(f0_hz=f0, voiced_mask=f0 > 0)
    else:
        def fn(mel: dsp.MelSpectrogram) -> dsp.PitchContour:
            f0 = _stretch_contour(item.pitch, mel.n_frames)
            f0[f0 < dsp.F0_MIN] = 0.0
            return dsp.PitchContour(f0_hz=f0, voiced_mask=f0 > 0)
    return fn


def train_stage2_step(
    batch: list[TrainItem],
    models: Models,
    config: TrainConfig,
    opt_p: torch.optim.Optimizer,
    step: int,
) -> LossReport:
    """One predictor update; every Stage-1 module stays frozen.

    Duration targets come from the unstretched alignment; pitch/energy and
    decoder-reconstruction targets come from a time-stretched copy of the
    utterance, with the style vector taken from that stretched mel itself.
    """
    samples = []
    for idx, item in enumerate(batch):
        mel_t = _mel_tensor(item.mel)
        ids_t = torch.as_tensor(item.ids)
        with torch.no_grad():
            soft, _ = models.aligner(mel_t, ids_t)
        hard = align.monotonic_search(
            align.SoftAlignment(soft.double().numpy())
        )
        d_gt = hard.path.sum(axis=1).astype(np.int64)

        scale = 1.0
        if config.use_augmentation:
            scale = float(_rng(config.seed, step, idx).uniform(*config.aug_range))
        mel_obj = dsp.MelSpectrogram(
            values=item.mel, n_mels=item.mel.shape[0],
            hop_length=dsp.DEFAULT_HOP, sample_rate=dsp.DEFAULT_SAMPLE_RATE,
        )
        try:
            aug = augment.build_augmented_sample(
                mel_obj, hard, scale, _extract_pitch_fn(models, config, item)
            )
        except augment.SampleSkipped:
            continue
        samples.append((item, ids_t, d_gt, aug))

    if not samples:
        return LossReport()

    seg = min(s[3].mel.n_frames for s in samples)
    l_dur, l_f0, l_n, l_de = [], [], [], []
    for idx, (item, ids_t, d_gt, aug) in enumerate(samples):
        mel_aug = _mel_tensor(aug.mel.values)
        with torch.no_grad():
            style = models.style_encoder(mel_aug)
            h_text = models.text_encoder(ids_t)
        dur_pred, h_pros = models.predictor.duration_forward(h_text, style)
        l_dur.append(L.dur_loss(torch.as_tensor(d_gt, dtype=torch.float32),
                                dur_pred))

        a_aug = torch.as_tensor(aug.alignment.path).float()
        p_hat, n_hat = models.predictor.prosody_forward(h_pros, a_aug, style)
        p_tgt = torch.as_tensor(aug.pitch.f0_hz, dtype=torch.float32)
        n_tgt = torch.as_tensor(aug.energy.log_norm, dtype=torch.float32)
        f0_term, n_term = L.f0_energy_losses(p_tgt, n_tgt, p_hat, n_hat)
        l_f0.append(f0_term)
        l_n.append(n_term)

        start = int(_rng(config.seed, step, idx, 1).integers(
            0, aug.mel.n_frames - seg + 1))
        sl = slice(start, start + seg)
        aligned = (h_text @ a_aug)[:, sl]
        with torch.no_grad():
            x_gt = models.decoder(aligned, style, p_tgt[sl], n_tgt[sl])
        x_pred = models.decoder(aligned, style, p_hat[sl], n_hat[sl])
        l_de.append(L.decoder_recon_loss(x_gt, x_pred))

    def _mean(terms):
        return sum(terms) / len(terms)

    dur_m, f0_m, n_m, de_m = _mean(l_dur), _mean(l_f0), _mean(l_n), _mean(l_de)
    total = L.stage2_total(de_m, dur_m, f0_m, n_m, config.hp)
    report = LossReport(
        dur=_f(dur_m), f0=_f(f0_m), energy=_f(n_m), de=_f(de_m),
        total=_f(total),
    )
    _check_finite(report, "stage2")
    opt_p.zero_grad()
    total.backward()
    opt_p.step()
    return report


# ---------------------------------------------------------------------------
# Run loop


STAGE_PRETRAIN_ALIGNER = "PRETRAIN_ALIGNER"
STAGE_PRETRAIN_PITCH = "PRETRAIN_PITCH"
STAGE1 = "STAGE1"
STAGE2 = "STAGE2"


def _load_into(models: Models, manifest_path, names) -> None:
    manifest = checkpoint.load_manifest(manifest_path)
    checkpoint.load_modules(
        manifest, {n: getattr(models, n) for n in names if n in manifest["modules"]}
    )


def run_training(
    config: TrainConfig,
    manifest_path,
    stage: str,
    out_dir,
    cache_dir=None,
    init_checkpoints: list = (),
    resume_from=None,
) -> Path:
    """Train one stage over a dataset manifest; returns the final checkpoint
    manifest path. ``init_checkpoints`` are loaded before training (e.g. the
    aligner/pitch pre-training results for Stage 1, the Stage-1 result for
    Stage 2); ``resume_from`` restores weights, optimizer state and step.
    """
    if stage not in checkpoint.STAGES:
        raise TrainError(f"unknown stage {stage!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = corpus.load_manifest(manifest_path)
    if not manifest.utterances:
        raise TrainError("empty corpus: nothing to train on")
    prepared = corpus.prepare_cache(
        manifest, cache_dir if cache_dir is not None else out_dir / "cache"
    )
    if prepared.failures:
        details = "; ".join(f"{p}: {m}" for p, m in prepared.failures)
        raise TrainError(f"corpus preparation failed: {details}")
    table = manifest.symbol_table()
    items = build_items(prepared, table)
    (out_dir / "symbols.json").write_text(json.dumps(table, sort_keys=True))

    model_config = config.model or ModelConfig.toy(vocab_size=len(table) + 1)
    models = Models.build(model_config, seed=config.seed)
    for ckpt in init_checkpoints:
        _load_into(models, ckpt, ALL_MODULES)

    if stage == STAGE_PRETRAIN_ALIGNER:
        optims = {"g": make_optimizer(models.aligner.parameters(), config)}
        step_fn = lambda b, s: pretrain_aligner_step(b, models, optims["g"], s)
        ckpt_modules = {"aligner": models.aligner}
    elif stage == STAGE_PRETRAIN_PITCH:
        optims = {"g": make_optimizer(models.pitch_extractor.parameters(), config)}
        step_fn = lambda b, s: pretrain_pitch_step(b, models, optims["g"], s)
        ckpt_modules = {"pitch_extractor": models.pitch_extractor}
    elif stage == STAGE1:
        optims = {"g": make_optimizer(models.generator_parameters(), config)}
        if model_config.use_discriminator:
            optims["d"] = make_optimizer(models.discriminator.parameters(), config)
        step_fn = lambda b, s: train_stage1_step(
            b, models, config, optims["g"], optims.get("d"), s)
        ckpt_modules = models.stage1_dict()
    else:  # STAGE2
        models.freeze_stage1()
        optims = {"g": make_optimizer(models.predictor.parameters(), config)}
        step_fn = lambda b, s: train_stage2_step(b, models, config, optims["g"], s)
        ckpt_modules = models.as_dict()

    start_step = 0
    if resume_from is not None:
        resume_manifest = checkpoint.load_manifest(resume_from)
        if resume_manifest["stage"] != stage:
            raise TrainError(
                f"resume checkpoint is for stage {resume_manifest['stage']}, "
                f"not {stage}"
            )
        checkpoint.load_modules(
            resume_manifest,
            {n: getattr(models, n) for n in resume_manifest["modules"]},
        )
        opt_state = checkpoint.load_optimizer_state(resume_manifest)
        if opt_state:
            for key, state in opt_state.items():
                if key in optims:
                    optims[key].load_state_dict(state)
        start_step = int(resume_manifest["step"])

    log_path = out_dir / "losses.csv"
    new_log = not (resume_from is not None and log_path.exists())
    log_file = log_path.open("w" if new_log else "a")
    if new_log:
        log_file.write(LossReport.CSV_HEADER + "\n")

    batch_per_epoch = (len(items) + config.batch_size - 1) // config.batch_size
    global_step = 0
    done = False
    final = None
    try:
        for epoch in range(config.epochs):
            order = _rng(config.seed, epoch, 0xBA7C).permutation(len(items))
            for b in range(batch_per_epoch):
                idxs = order[b * config.batch_size : (b + 1) * config.batch_size]
                if len(idxs) == 0:
                    continue
                if global_step >= start_step:
                    report = step_fn([items[i] for i in idxs], global_step)
                    log_file.write(report.csv_row(global_step) + "\n")
                    if config.log_every and global_step % config.log_every == 0:
                        log.info("%s step %d total %.4f",
                                 stage, global_step, report.total)
                global_step += 1
                if (
                    config.checkpoint_every
                    and global_step > start_step
                    and global_step % config.checkpoint_every == 0
                ):
                    _save(out_dir / f"step_{global_step:06d}", stage,
                          global_step, ckpt_modules, model_config, optims,
                          config.seed)
                if config.max_steps is not None and global_step >= config.max_steps:
                    done = True
                    break
            if done:
                break
    finally:
        log_file.close()
    final = _save(out_dir / "final", stage, global_step, ckpt_modules,
                  model_config, optims, config.seed)
    return final


def _save(directory, stage, step, modules, model_config, optims, seed) -> Path:
    return checkpoint.save_checkpoint(
        directory,
        stage,
        step,
        modules,
        model_config,
        optimizer_state={k: o.state_dict() for k, o in optims.items()},
        seed=seed,
    )
