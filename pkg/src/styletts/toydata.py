"""Synthetic toy corpora for tests and demos.

Each "phoneme" is rendered as a short harmonic tone whose fundamental depends
on the symbol and the speaker, so that alignment, pitch, and style structure
are all recoverable. Utterances are written as 16-bit PCM WAV files together
with a manifest line ``relative/path.wav|transcript|speaker_id``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp

TOY_SYMBOLS = "abcdefgh"
# Base fundamental per speaker; symbols select a scale degree above it.
SPEAKER_BASE_HZ = {"spk0": 110.0, "spk1": 196.0, "spk2": 147.0, "spk3": 262.0}
SEMITONE = 2.0 ** (1.0 / 12.0)


@dataclass
class ToyCorpus:
    root: Path
    manifest_path: Path
    entries: list[tuple[str, str, str]] = field(default_factory=list)


def symbol_frequency(symbol: str, speaker: str) -> float:
    base = SPEAKER_BASE_HZ[speaker]
    degree = TOY_SYMBOLS.index(symbol)
    return base * SEMITONE ** (2 * degree)


def render_utterance(
    transcript: str,
    speaker: str,
    sample_rate: int = dsp.DEFAULT_SAMPLE_RATE,
    seconds_per_symbol: float = 0.12,
    rng: np.random.Generator | None = None,
) -> dsp.AudioClip:
    """Render a transcript as a sequence of harmonic tones."""
    if rng is None:
        rng = np.random.default_rng(0)
    if not transcript or any(c not in TOY_SYMBOLS for c in transcript):
        raise ValueError(f"transcript must be non-empty over {TOY_SYMBOLS!r}")
    n_seg = int(round(seconds_per_symbol * sample_rate))
    pieces = []
    for symbol in transcript:
        f0 = symbol_frequency(symbol, speaker)
        # small per-utterance duration jitter keeps alignments non-trivial
        n = n_seg + int(rng.integers(-n_seg // 8, n_seg // 8 + 1))
        t = np.arange(n) / sample_rate
        phase = float(rng.uniform(0.0, 2.0 * np.pi))
        seg = (
            0.6 * np.sin(2 * np.pi * f0 * t + phase)
            + 0.25 * np.sin(2 * np.pi * 2 * f0 * t + phase)
            + 0.1 * np.sin(2 * np.pi * 3 * f0 * t + phase)
        )
        fade = min(n // 10, 240)
        env = np.ones(n)
        env[:fade] = np.linspace(0.0, 1.0, fade)
        env[-fade:] = np.linspace(1.0, 0.0, fade)
        pieces.append(seg * env)
    samples = np.concatenate(pieces).astype(np.float64)
    samples *= 0.9 / max(np.abs(samples).max(), 1e-9)
    return dsp.AudioClip(samples=samples, sample_rate=sample_rate)


def build_corpus(
    root,
    n_utterances: int = 8,
    speakers: tuple[str, ...] = ("spk0", "spk1"),
    symbols_per_utterance: tuple[int, int] = (3, 6),
    seed: int = 0,
    sample_rate: int = dsp.DEFAULT_SAMPLE_RATE,
) -> ToyCorpus:
    """Write WAVs + manifest under ``root``; round-robin over speakers."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_utterances):
        speaker = speakers[i % len(speakers)]
        length = int(rng.integers(symbols_per_utterance[0],
                                  symbols_per_utterance[1] + 1))
        transcript = "".join(
            TOY_SYMBOLS[int(rng.integers(0, len(TOY_SYMBOLS)))]
            for _ in range(length)
        )
        rel = f"{speaker}/utt{i:03d}.wav"
        clip = render_utterance(transcript, speaker,
                                sample_rate=sample_rate, rng=rng)
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        dsp.save_audio(path, clip)
        entries.append((rel, transcript, speaker))
    manifest_path = root / "manifest.txt"
    manifest_path.write_text(
        "".join(f"{rel}|{text}|{spk}\n" for rel, text, spk in entries)
    )
    return ToyCorpus(root=root, manifest_path=manifest_path, entries=entries)
