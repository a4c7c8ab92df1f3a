"""Audio front-end: WAV I/O, mel/energy/F0 extraction, Griffin-Lim inversion,
and the acoustic feature measurements used by the evaluation harness.

All functions here are pure and operate on numpy arrays; nothing in this
module touches torch.
"""

from __future__ import annotations

import dataclasses
import wave
from pathlib import Path

import numpy as np

MEL_FLOOR = 1e-5
ENERGY_EPS = 1e-9

DEFAULT_SAMPLE_RATE = 24000
DEFAULT_N_FFT = 2048
DEFAULT_HOP = 300
DEFAULT_WIN = 1200
DEFAULT_N_MELS = 80

YIN_THRESHOLD = 0.15
F0_MIN = 50.0
F0_MAX = 1000.0


class DspError(Exception):
    """Base class for DSP failures."""


class AudioIOError(DspError):
    """Unreadable or malformed audio file."""


class ValidationError(DspError):
    """Input violates a documented precondition."""


class UndefinedCorrelationError(DspError):
    """Pearson correlation requested on a zero-variance vector."""


@dataclasses.dataclass
class AudioClip:
    """Mono audio in [-1, 1] at a known sample rate."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValidationError("AudioClip must be mono (1-D samples)")
        if self.sample_rate <= 0:
            raise ValidationError("sample_rate must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("audio samples must be finite")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclasses.dataclass
class MelSpectrogram:
    """Log-magnitude mel spectrogram, [n_mels x T]."""

    values: np.ndarray
    n_mels: int
    hop_length: int
    sample_rate: int

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.n_mels:
            raise ValidationError("mel values must be [n_mels x T]")
        if self.values.shape[1] < 1:
            raise ValidationError("mel must have at least one frame")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("mel values must be finite")

    @property
    def n_frames(self) -> int:
        return self.values.shape[1]


@dataclasses.dataclass
class PitchContour:
    """Per-frame F0 in Hz; 0 encodes unvoiced."""

    f0_hz: np.ndarray
    voiced_mask: np.ndarray

    def __post_init__(self):
        self.f0_hz = np.asarray(self.f0_hz, dtype=np.float64)
        self.voiced_mask = np.asarray(self.voiced_mask, dtype=bool)
        if self.f0_hz.shape != self.voiced_mask.shape:
            raise ValidationError("f0 and voiced mask must share a shape")
        if np.any((self.f0_hz == 0) != ~self.voiced_mask):
            raise ValidationError("f0 == 0 must coincide with unvoiced frames")


@dataclasses.dataclass
class EnergyContour:
    """Per-frame log L2 norm of the linear mel magnitudes."""

    log_norm: np.ndarray

    def __post_init__(self):
        self.log_norm = np.asarray(self.log_norm, dtype=np.float64)
        if not np.all(np.isfinite(self.log_norm)):
            raise ValidationError("energy must be finite")


@dataclasses.dataclass
class AcousticFeatureSet:
    pitch_mean: float
    pitch_std: float
    energy_mean: float
    energy_std: float
    hnr_db: float
    speaking_rate: float
    jitter: float
    shimmer: float
    voiced: bool = True

    CSV_HEADER = (
        "utterance,pitch_mean,pitch_std,energy_mean,energy_std,"
        "hnr_db,speaking_rate,jitter,shimmer"
    )
    FEATURE_NAMES = (
        "pitch_mean",
        "pitch_std",
        "energy_mean",
        "energy_std",
        "hnr_db",
        "speaking_rate",
        "jitter",
        "shimmer",
    )

    def as_vector(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in self.FEATURE_NAMES])


# ---------------------------------------------------------------------------
# WAV I/O


def load_audio(path, target_rate: int) -> AudioClip:
    """Read a 16-bit PCM WAV, average channels to mono, resample linearly."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sampwidth = wf.getsampwidth()
            rate = wf.getframerate()
            n_frames = wf.getnframes()
            raw = wf.readframes(n_frames)
    except (OSError, wave.Error) as exc:
        raise AudioIOError(f"cannot read WAV file {path}: {exc}") from exc
    if sampwidth != 2:
        raise AudioIOError(f"{path}: only 16-bit PCM WAV is supported")
    data = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if n_channels > 1:
        data = data.reshape(-1, n_channels).mean(axis=1)
    if len(data) == 0:
        raise ValidationError(f"{path}: zero-length audio")
    if rate != target_rate:
        data = _resample_linear(data, rate, target_rate)
    return AudioClip(samples=data, sample_rate=target_rate)


def save_audio(path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM mono WAV."""
    samples = np.clip(clip.samples, -1.0, 1.0)
    pcm = (samples * 32767.0).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(clip.sample_rate)
        wf.writeframes(pcm.tobytes())


def _resample_linear(data: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    n_out = int(round(len(data) * rate_out / rate_in))
    if n_out < 1:
        raise ValidationError("resampled audio would be empty")
    t_in = np.arange(len(data)) / rate_in
    t_out = np.arange(n_out) / rate_out
    return np.interp(t_out, t_in, data)


# ---------------------------------------------------------------------------
# STFT / mel


def _hann(win: int) -> np.ndarray:
    return np.hanning(win)


def _frame_signal(samples: np.ndarray, hop: int, win: int) -> np.ndarray:
    """Center-padded framing: frame k covers padded[k*hop : k*hop+win]."""
    pad = win // 2
    padded = np.pad(samples, pad, mode="reflect")
    n_frames = len(samples) // hop + 1
    idx = np.arange(win)[None, :] + hop * np.arange(n_frames)[:, None]
    return padded[idx]


def _stft(samples: np.ndarray, n_fft: int, hop: int, win: int) -> np.ndarray:
    frames = _frame_signal(samples, hop, win) * _hann(win)[None, :]
    return np.fft.rfft(frames, n=n_fft, axis=1).T  # [n_fft//2+1, T]


def _istft(spec: np.ndarray, n_fft: int, hop: int, win: int, length: int) -> np.ndarray:
    frames = np.fft.irfft(spec.T, n=n_fft, axis=1)[:, :win]
    window = _hann(win)
    frames = frames * window[None, :]
    pad = win // 2
    total = (frames.shape[0] - 1) * hop + win
    out = np.zeros(total)
    norm = np.zeros(total)
    for k in range(frames.shape[0]):
        out[k * hop : k * hop + win] += frames[k]
        norm[k * hop : k * hop + win] += window**2
    out = out / np.maximum(norm, 1e-10)
    return out[pad : pad + length]


def _hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)


def _mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int) -> np.ndarray:
    """Triangular mel filters, [n_mels x n_fft//2+1]."""
    n_bins = n_fft // 2 + 1
    fft_freqs = np.linspace(0, sample_rate / 2, n_bins)
    mel_points = np.linspace(_hz_to_mel(0.0), _hz_to_mel(sample_rate / 2), n_mels + 2)
    hz_points = _mel_to_hz(mel_points)
    fb = np.zeros((n_mels, n_bins))
    for m in range(n_mels):
        lo, ctr, hi = hz_points[m], hz_points[m + 1], hz_points[m + 2]
        up = (fft_freqs - lo) / max(ctr - lo, 1e-10)
        down = (hi - fft_freqs) / max(hi - ctr, 1e-10)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def mel_spectrogram(
    clip: AudioClip,
    n_fft: int = DEFAULT_N_FFT,
    hop: int = DEFAULT_HOP,
    win: int = DEFAULT_WIN,
    n_mels: int = DEFAULT_N_MELS,
) -> MelSpectrogram:
    """Natural-log mel magnitudes with floor ``MEL_FLOOR``; T = len//hop + 1."""
    if len(clip.samples) < win:
        raise ValidationError(
            f"clip too short: {len(clip.samples)} samples < window {win}"
        )
    spec = np.abs(_stft(clip.samples, n_fft, hop, win))
    fb = mel_filterbank(clip.sample_rate, n_fft, n_mels)
    mel = fb @ spec
    values = np.log(np.maximum(mel, MEL_FLOOR))
    return MelSpectrogram(
        values=values, n_mels=n_mels, hop_length=hop, sample_rate=clip.sample_rate
    )


def frame_energy(mel: MelSpectrogram) -> EnergyContour:
    """Per-frame log L2 norm of the linear magnitudes recovered from log-mel."""
    linear = np.exp(mel.values)
    return EnergyContour(log_norm=np.log(np.linalg.norm(linear, axis=0) + ENERGY_EPS))


# ---------------------------------------------------------------------------
# YIN pitch


def yin_f0(
    clip: AudioClip,
    hop: int = DEFAULT_HOP,
    win: int = DEFAULT_WIN,
    threshold: float = YIN_THRESHOLD,
    f0_min: float = F0_MIN,
    f0_max: float = F0_MAX,
) -> PitchContour:
    """YIN pitch, one value per mel frame (same hop/center convention).

    Difference function, cumulative mean normalization, absolute threshold,
    parabolic interpolation. Unvoiced frames carry f0 = 0.
    """
    fs = clip.sample_rate
    tau_min = max(2, int(fs / f0_max))
    tau_max = int(fs / f0_min)
    frame_len = win + tau_max
    if len(clip.samples) < 2 * win:
        raise ValidationError("clip too short for pitch analysis")

    pad = frame_len // 2
    padded = np.pad(clip.samples, pad, mode="reflect")
    n_frames = len(clip.samples) // hop + 1

    f0 = np.zeros(n_frames)
    for k in range(n_frames):
        seg = padded[k * hop : k * hop + frame_len]
        tau, strength = _yin_frame(seg, win, tau_min, tau_max, threshold)
        if tau > 0:
            f0[k] = fs / tau
    voiced = f0 > 0
    return PitchContour(f0_hz=f0, voiced_mask=voiced)


def _yin_frame(seg, win, tau_min, tau_max, threshold):
    """Return (tau, cmndf value) for one frame, tau = 0 when unvoiced."""
    x = seg[: win + tau_max]
    # d(tau) = r(0) + r_tau(0) - 2*acf(tau) over a window of length `win`
    acf = np.array(
        [np.dot(x[:win], x[tau : tau + win]) for tau in range(tau_max + 1)]
    )
    energy = np.concatenate(([0.0], np.cumsum(x**2)))
    r0 = acf[0]
    # energy of x[tau:tau+win]
    r_tau = energy[np.arange(tau_max + 1) + win] - energy[np.arange(tau_max + 1)]
    d = r0 + r_tau - 2.0 * acf
    d[0] = 0.0
    # cumulative mean normalized difference
    cmndf = np.ones_like(d)
    running = np.cumsum(d[1:])
    nonzero = running > 0
    cmndf[1:][nonzero] = d[1:][nonzero] * np.arange(1, len(d))[nonzero] / running[nonzero]
    cmndf[1:][~nonzero] = 1.0

    tau = 0
    for t in range(tau_min, min(tau_max, len(cmndf) - 1)):
        if cmndf[t] < threshold:
            # descend to the local minimum of the dip
            while t + 1 < len(cmndf) and cmndf[t + 1] < cmndf[t]:
                t += 1
            tau = t
            break
    if tau == 0:
        return 0.0, 1.0
    # parabolic interpolation around the minimum
    if 1 <= tau < len(cmndf) - 1:
        a, b, c = cmndf[tau - 1], cmndf[tau], cmndf[tau + 1]
        denom = a - 2 * b + c
        if abs(denom) > 1e-12:
            shift = 0.5 * (a - c) / denom
            if abs(shift) < 1:
                return tau + shift, b
    return float(tau), cmndf[tau]


# ---------------------------------------------------------------------------
# Griffin-Lim


def griffin_lim_invert(
    mel: MelSpectrogram,
    iterations: int = 32,
    n_fft: int = DEFAULT_N_FFT,
    win: int = DEFAULT_WIN,
) -> AudioClip:
    """Invert a log-mel to audio via filterbank pseudo-inverse + Griffin-Lim."""
    if iterations < 1:
        raise ValidationError("iterations must be >= 1")
    hop = mel.hop_length
    fb = mel_filterbank(mel.sample_rate, n_fft, mel.n_mels)
    linear_mel = np.exp(mel.values)
    # remove the floor: all-floor cells correspond to silence
    linear_mel = np.maximum(linear_mel - MEL_FLOOR, 0.0)
    mag = np.maximum(np.linalg.pinv(fb) @ linear_mel, 0.0)

    length = hop * (mel.n_frames - 1)
    if length <= 0:
        length = hop
    phase = np.zeros_like(mag)
    spec = mag * np.exp(1j * phase)
    audio = _istft(spec, n_fft, hop, win, length)
    for _ in range(iterations - 1):
        reproj = _stft(audio, n_fft, hop, win)
        reproj = reproj[:, : mag.shape[1]]
        if reproj.shape[1] < mag.shape[1]:
            reproj = np.pad(reproj, ((0, 0), (0, mag.shape[1] - reproj.shape[1])))
        phase = np.angle(reproj)
        audio = _istft(mag * np.exp(1j * phase), n_fft, hop, win, length)
    peak = np.max(np.abs(audio))
    if peak > 1.0:
        audio = audio / peak
    return AudioClip(samples=audio, sample_rate=mel.sample_rate)


# ---------------------------------------------------------------------------
# Acoustic features


def _refine_peak(samples: np.ndarray, idx: int) -> tuple[float, float]:
    """Parabolic sub-sample refinement of a local maximum."""
    if 1 <= idx < len(samples) - 1:
        a, b, c = samples[idx - 1], samples[idx], samples[idx + 1]
        denom = a - 2 * b + c
        if abs(denom) > 1e-20:
            shift = 0.5 * (a - c) / denom
            if abs(shift) <= 1:
                return idx + shift, b - 0.25 * (a - c) * shift
    return float(idx), float(samples[idx])


def _period_marks(
    samples: np.ndarray, fs: int, f0_guide: float
) -> tuple[np.ndarray, np.ndarray]:
    """Glottal-cycle proxy: successive waveform peaks guided by the median F0.

    Returns sub-sample peak positions and interpolated peak amplitudes.
    """
    period = fs / f0_guide
    first_end = min(len(samples), int(1.5 * period))
    if first_end < 2:
        return np.array([]), np.array([])
    pos, amp = _refine_peak(samples, int(np.argmax(samples[:first_end])))
    marks = [pos]
    amps = [amp]
    while True:
        lo = int(marks[-1] + 0.7 * period)
        hi = int(marks[-1] + 1.4 * period)
        if hi >= len(samples) or lo >= hi:
            break
        pos, amp = _refine_peak(samples, lo + int(np.argmax(samples[lo:hi])))
        period = pos - marks[-1]
        marks.append(pos)
        amps.append(amp)
    return np.array(marks), np.array(amps)


def _hnr_db(samples: np.ndarray, fs: int, f0: PitchContour, hop: int) -> float:
    """Mean 10*log10(r/(1-r)) over voiced frames, r = autocorrelation at the
    pitch lag."""
    vals = []
    for k in np.flatnonzero(f0.voiced_mask):
        lag = int(round(fs / f0.f0_hz[k]))
        center = k * hop
        w = 3 * lag
        lo = max(0, center - w // 2)
        seg = samples[lo : lo + w + lag]
        if len(seg) < lag + 8:
            continue
        a = seg[:-lag]
        b = seg[lag:]
        denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
        if denom <= 0:
            continue
        r = np.dot(a, b) / denom
        r = min(max(r, 1e-6), 1.0 - 1e-6)
        vals.append(10.0 * np.log10(r / (1.0 - r)))
    return float(np.mean(vals)) if vals else 0.0


def acoustic_features(
    clip: AudioClip, mel: MelSpectrogram, f0: PitchContour
) -> AcousticFeatureSet:
    """Pitch/energy statistics, HNR, speaking rate, jitter and shimmer."""
    energy = frame_energy(mel).log_norm
    energy_mean = float(np.mean(energy))
    energy_std = float(np.std(energy))

    voiced = f0.voiced_mask
    n_voiced = int(np.count_nonzero(voiced))
    duration = clip.duration

    # speaking rate: voiced-segment onsets per second (audio-only proxy)
    onsets = int(np.count_nonzero(np.diff(voiced.astype(int)) == 1))
    if n_voiced and voiced[0]:
        onsets += 1
    speaking_rate = onsets / duration if duration > 0 else 0.0

    if n_voiced < 2:
        return AcousticFeatureSet(
            pitch_mean=0.0,
            pitch_std=0.0,
            energy_mean=energy_mean,
            energy_std=energy_std,
            hnr_db=0.0,
            speaking_rate=speaking_rate,
            jitter=0.0,
            shimmer=0.0,
            voiced=False,
        )

    vf0 = f0.f0_hz[voiced]
    pitch_mean = float(np.mean(vf0))
    pitch_std = float(np.std(vf0))
    hnr = _hnr_db(clip.samples, clip.sample_rate, f0, mel.hop_length)

    marks, amps = _period_marks(clip.samples, clip.sample_rate, float(np.median(vf0)))
    jitter = 0.0
    shimmer = 0.0
    if len(marks) >= 3:
        periods = np.diff(marks) / clip.sample_rate
        amps = np.abs(amps)
        mean_t = np.mean(periods)
        if mean_t > 0:
            jitter = float(np.mean(np.abs(np.diff(periods))) / mean_t)
        mean_a = np.mean(amps)
        if mean_a > 0:
            shimmer = float(np.mean(np.abs(np.diff(amps))) / mean_a)

    return AcousticFeatureSet(
        pitch_mean=pitch_mean,
        pitch_std=pitch_std,
        energy_mean=energy_mean,
        energy_std=energy_std,
        hnr_db=hnr,
        speaking_rate=speaking_rate,
        jitter=jitter,
        shimmer=shimmer,
        voiced=True,
    )


def pearson_correlation(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValidationError("inputs must be equal-length vectors of length >= 2")
    da = a - a.mean()
    db = b - b.mean()
    va = np.dot(da, da)
    vb = np.dot(db, db)
    if va <= 0 or vb <= 0:
        raise UndefinedCorrelationError("zero variance input")
    r = float(np.dot(da, db) / np.sqrt(va * vb))
    return max(-1.0, min(1.0, r))
