"""Dataset manifests and the mel/pitch/energy feature cache.

A manifest is UTF-8 text, one utterance per line:
``relative/path.wav|transcript|speaker_id``. ``prepare_cache`` extracts the
mel spectrogram (MEL1 file), pitch contour, and energy contour for each
utterance, keyed by a content hash so re-runs skip unchanged audio.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dsp, formats

log = logging.getLogger(__name__)


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class Utterance:
    audio_path: Path
    transcript: str
    speaker: str
    utt_id: str


@dataclass
class Manifest:
    root: Path
    utterances: list[Utterance]

    @property
    def speakers(self) -> list[str]:
        return sorted({u.speaker for u in self.utterances})

    def symbol_table(self) -> dict[str, int]:
        """Character table over all transcripts; id 0 reserved for padding."""
        symbols = sorted({c for u in self.utterances for c in u.transcript})
        return {c: i + 1 for i, c in enumerate(symbols)}


def load_manifest(path) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise CorpusError(f"manifest not found: {path}")
    utterances = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = line.split("|")
        if len(parts) != 3:
            raise CorpusError(
                f"{path}:{lineno}: expected 'path|transcript|speaker', got {line!r}"
            )
        rel, transcript, speaker = parts
        if not transcript:
            raise CorpusError(f"{path}:{lineno}: empty transcript")
        utt_id = rel.replace("/", "_").rsplit(".", 1)[0]
        utterances.append(
            Utterance(
                audio_path=path.parent / rel,
                transcript=transcript,
                speaker=speaker,
                utt_id=utt_id,
            )
        )
    return Manifest(root=path.parent, utterances=utterances)


def encode_transcript(transcript: str, table: dict[str, int]) -> np.ndarray:
    try:
        return np.array([table[c] for c in transcript], dtype=np.int64)
    except KeyError as exc:
        raise CorpusError(f"symbol {exc.args[0]!r} not in symbol table") from exc


@dataclass
class CachedUtterance:
    utterance: Utterance
    mel_path: Path
    pitch_path: Path
    energy_path: Path

    def load(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mel = formats.read_mel1(self.mel_path)
        pitch = np.load(self.pitch_path)
        energy = np.load(self.energy_path)
        return mel, pitch, energy


@dataclass
class PrepareResult:
    cached: list[CachedUtterance]
    computed: int
    skipped: int
    failures: list[tuple[str, str]] = field(default_factory=list)


def _content_hash(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def prepare_cache(
    manifest: Manifest,
    cache_dir,
    sample_rate: int = dsp.DEFAULT_SAMPLE_RATE,
) -> PrepareResult:
    """Extract mel/pitch/energy per utterance; idempotent via content hash."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    index_path = cache_dir / "index.json"
    index = json.loads(index_path.read_text()) if index_path.exists() else {}

    cached, failures = [], []
    computed = skipped = 0
    for utt in manifest.utterances:
        mel_path = cache_dir / f"{utt.utt_id}.mel"
        pitch_path = cache_dir / f"{utt.utt_id}.f0.npy"
        energy_path = cache_dir / f"{utt.utt_id}.energy.npy"
        try:
            digest = _content_hash(utt.audio_path)
        except OSError as exc:
            failures.append((str(utt.audio_path), str(exc)))
            continue
        entry = CachedUtterance(utt, mel_path, pitch_path, energy_path)
        if (
            index.get(utt.utt_id) == digest
            and mel_path.exists()
            and pitch_path.exists()
            and energy_path.exists()
        ):
            skipped += 1
            cached.append(entry)
            continue
        try:
            clip = dsp.load_audio(utt.audio_path, target_rate=sample_rate)
            mel = dsp.mel_spectrogram(clip)
            pitch = dsp.yin_f0(clip)
            energy = dsp.frame_energy(mel)
        except dsp.DspError as exc:
            failures.append((str(utt.audio_path), str(exc)))
            continue
        formats.write_mel1(mel_path, mel.values)
        np.save(pitch_path, pitch.f0_hz)
        np.save(energy_path, energy.log_norm)
        index[utt.utt_id] = digest
        computed += 1
        cached.append(entry)
        log.info("cached features for %s", utt.utt_id)

    index_path.write_text(json.dumps(index, indent=2, sort_keys=True))
    return PrepareResult(
        cached=cached, computed=computed, skipped=skipped, failures=failures
    )
