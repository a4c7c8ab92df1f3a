"""Duration-invariant data augmentation: time-stretch the mel, re-extract
prosody targets, and rescale the alignment to the new frame count."""

from __future__ import annotations

import dataclasses
import logging

import numpy as np

from . import dsp
from .alignment import DurationVector, HardAlignment, durations_to_alignment, repair_durations

log = logging.getLogger(__name__)

SCALE_MIN = 0.5
SCALE_MAX = 2.0
TRAIN_SCALE_RANGE = (0.75, 1.25)


class AugmentError(Exception):
    pass


class SampleSkipped(AugmentError):
    """Raised when a stretch would leave fewer frames than phonemes."""


@dataclasses.dataclass
class AugmentedSample:
    mel: dsp.MelSpectrogram
    scale: float
    pitch: dsp.PitchContour
    energy: dsp.EnergyContour
    alignment: HardAlignment


def _target_frames(t: int, scale: float) -> int:
    return int(np.floor(scale * t + 0.5))  # round half up


def time_stretch_mel(x: dsp.MelSpectrogram, scale: float) -> dsp.MelSpectrogram:
    """Linear interpolation along time onto round(scale*T) endpoint-inclusive
    positions (align-corners convention)."""
    if not SCALE_MIN <= scale <= SCALE_MAX:
        raise AugmentError(f"scale {scale} outside [{SCALE_MIN}, {SCALE_MAX}]")
    t = x.n_frames
    t_new = _target_frames(t, scale)
    if t_new < 1:
        raise AugmentError("stretched mel would be empty")
    if t_new == 1 or t == 1:
        positions = np.zeros(t_new)
    else:
        positions = np.arange(t_new) * (t - 1) / (t_new - 1)
    grid = np.arange(t)
    values = np.stack([np.interp(positions, grid, row) for row in x.values])
    return dsp.MelSpectrogram(
        values=values, n_mels=x.n_mels, hop_length=x.hop_length, sample_rate=x.sample_rate
    )


def stretch_durations(d: DurationVector, t_new: int) -> DurationVector:
    """Scale each phoneme's frame count proportionally, then integerize with
    the largest-remainder repair (sum exactly t_new, every entry >= 1)."""
    scaled = d.frames_per_phoneme.astype(np.float64) * (t_new / d.total_frames)
    return DurationVector(repair_durations(scaled, t_new))


def _stretch_contour(values: np.ndarray, t_new: int) -> np.ndarray:
    t = len(values)
    if t_new == 1 or t == 1:
        positions = np.zeros(t_new)
    else:
        positions = np.arange(t_new) * (t - 1) / (t_new - 1)
    return np.interp(positions, np.arange(t), values)


def build_augmented_sample(
    x: dsp.MelSpectrogram,
    alignment: HardAlignment,
    scale: float,
    pitch_extractor,
    resample_targets: bool = False,
    original_pitch: dsp.PitchContour | None = None,
) -> AugmentedSample:
    """Stretch the mel, recompute prosody targets from the stretched mel,
    and rescale the alignment.

    ``pitch_extractor`` maps a MelSpectrogram to a PitchContour (typically
    the trained pitch network). With ``resample_targets`` the pitch target
    is instead a time-resampled copy of ``original_pitch``.
    """
    n = alignment.n_phonemes
    t_new = _target_frames(x.n_frames, scale)
    if n > t_new:
        log.info("augmentation skipped: N=%d > stretched T=%d", n, t_new)
        raise SampleSkipped(f"{n} phonemes cannot fit in {t_new} frames")
    mel = time_stretch_mel(x, scale)
    d = DurationVector(alignment.path.sum(axis=1))
    new_alignment = durations_to_alignment(stretch_durations(d, t_new))
    if resample_targets:
        if original_pitch is None:
            raise AugmentError("resample_targets requires original_pitch")
        f0 = _stretch_contour(original_pitch.f0_hz, t_new)
        f0[f0 < dsp.F0_MIN] = 0.0
        pitch = dsp.PitchContour(f0_hz=f0, voiced_mask=f0 > 0)
    else:
        pitch = pitch_extractor(mel)
    energy = dsp.frame_energy(mel)
    return AugmentedSample(
        mel=mel, scale=scale, pitch=pitch, energy=energy, alignment=new_alignment
    )
