"""Inference: text-to-mel synthesis with a reference style, and any-to-any
voice conversion. Inference always uses hard alignments."""

from __future__ import annotations

import dataclasses

import numpy as np
import torch

from . import alignment as align
from . import dsp, formats
from .train import Models, _mel_tensor


class SynthError(Exception):
    pass


@dataclasses.dataclass
class SynthesisRequest:
    ids: np.ndarray                  # [N] symbol ids
    reference_mel: dsp.MelSpectrogram
    duration_scale: float = 1.0
    pitch_offset_hz: float = 0.0
    pitch_scale: float = 1.0
    energy_offset: float = 0.0

    def __post_init__(self):
        values = (self.duration_scale, self.pitch_offset_hz,
                  self.pitch_scale, self.energy_offset)
        if not all(np.isfinite(v) for v in values):
            raise SynthError("overrides must be finite")
        if self.duration_scale <= 0:
            raise SynthError("duration scale must be positive")


@dataclasses.dataclass
class ProsodyTrack:
    pitch_hz: np.ndarray
    energy: np.ndarray


def predicted_durations(raw: np.ndarray, scale: float) -> align.DurationVector:
    """Round-half-up of scaled predictions, minimum one frame each."""
    frames = np.floor(np.asarray(raw, dtype=np.float64) * scale + 0.5)
    return align.DurationVector(np.maximum(frames, 1).astype(np.int64))


@torch.no_grad()
def synthesize(
    req: SynthesisRequest, models: Models
) -> tuple[dsp.MelSpectrogram, align.DurationVector, ProsodyTrack]:
    """Full inference pipeline; output frame count = sum of durations."""
    ids_t = torch.as_tensor(np.asarray(req.ids, dtype=np.int64))
    ref = _mel_tensor(req.reference_mel.values)
    style = models.style_encoder(ref)
    h_text = models.text_encoder(ids_t)

    dur_raw, h_pros = models.predictor.duration_forward(h_text, style)
    durations = predicted_durations(dur_raw.numpy(), req.duration_scale)
    hard = align.durations_to_alignment(durations)
    a = torch.as_tensor(hard.path).float()

    pitch, energy = models.predictor.prosody_forward(h_pros, a, style)
    pitch = pitch * req.pitch_scale + req.pitch_offset_hz
    energy = energy + req.energy_offset

    mel = models.decoder(h_text @ a, style, pitch, energy)
    out = dsp.MelSpectrogram(
        values=mel.double().numpy(),
        n_mels=mel.shape[0],
        hop_length=req.reference_mel.hop_length,
        sample_rate=req.reference_mel.sample_rate,
    )
    return out, durations, ProsodyTrack(
        pitch_hz=pitch.numpy().astype(np.float64),
        energy=energy.numpy().astype(np.float64),
    )


@torch.no_grad()
def voice_convert(
    source_mel: dsp.MelSpectrogram,
    source_ids: np.ndarray,
    target_reference_mel: dsp.MelSpectrogram,
    models: Models,
) -> dsp.MelSpectrogram:
    """Re-decode the source's alignment/pitch/energy with the target's style;
    output length equals the source frame count."""
    src = _mel_tensor(source_mel.values)
    ids_t = torch.as_tensor(np.asarray(source_ids, dtype=np.int64))
    soft, _ = models.aligner(src, ids_t)
    hard = align.monotonic_search(align.SoftAlignment(soft.double().numpy()))
    a = torch.as_tensor(hard.path).float()

    pitch = models.pitch_extractor(src)
    energy = torch.as_tensor(
        dsp.frame_energy(source_mel).log_norm, dtype=torch.float32
    )
    style = models.style_encoder(_mel_tensor(target_reference_mel.values))
    h_text = models.text_encoder(ids_t)
    mel = models.decoder(h_text @ a, style, pitch, energy)
    return dsp.MelSpectrogram(
        values=mel.double().numpy(),
        n_mels=mel.shape[0],
        hop_length=source_mel.hop_length,
        sample_rate=source_mel.sample_rate,
    )


@torch.no_grad()
def export_style_vectors(
    mels: list[tuple[str, dsp.MelSpectrogram]], models: Models, out_path
) -> None:
    """Write one style vector per (utterance id, mel) to an STY1 file."""
    records = [
        (utt_id, models.style_encoder(_mel_tensor(mel.values)).numpy())
        for utt_id, mel in mels
    ]
    dim = len(records[0][1]) if records else 0
    formats.write_sty1(out_path, records, dim=dim or 128)
