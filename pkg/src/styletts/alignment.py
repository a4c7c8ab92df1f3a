"""Monotonic alignment search, soft/hard conversions, duration bookkeeping,
and the hard/soft mixing policy used during the first training stage.
"""

from __future__ import annotations

import dataclasses
import enum
import warnings

import numpy as np

MAS_EPS = 1e-8


class AlignmentError(Exception):
    pass


class InfeasibleAlignmentError(AlignmentError):
    """Raised when N > T, i.e. no surjective monotonic path exists."""


class DegenerateDurationWarning(UserWarning):
    pass


@dataclasses.dataclass
class SoftAlignment:
    """Attention over phonemes per frame, [N x T]; columns sum to 1."""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise AlignmentError("soft alignment must be a matrix")
        if np.any(self.weights < 0):
            raise AlignmentError("soft alignment weights must be non-negative")
        col_sums = self.weights.sum(axis=0)
        if np.any(np.abs(col_sums - 1.0) > 1e-4):
            raise AlignmentError("each soft alignment column must sum to 1")

    @property
    def n_phonemes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_frames(self) -> int:
        return self.weights.shape[1]


@dataclasses.dataclass
class HardAlignment:
    """One-hot monotonic surjective path, [N x T]."""

    path: np.ndarray

    def __post_init__(self):
        self.path = np.asarray(self.path)
        if self.path.ndim != 2:
            raise AlignmentError("hard alignment must be a matrix")
        if not np.all(np.isin(self.path, (0, 1))):
            raise AlignmentError("hard alignment must be binary")
        if np.any(self.path.sum(axis=0) != 1):
            raise AlignmentError("each column must have exactly one 1")
        rows = np.argmax(self.path, axis=0)
        if np.any(np.diff(rows) < 0):
            raise AlignmentError("selected row must be non-decreasing over frames")
        if np.any(self.path.sum(axis=1) < 1):
            raise AlignmentError("every phoneme must cover at least one frame")

    @property
    def n_phonemes(self) -> int:
        return self.path.shape[0]

    @property
    def n_frames(self) -> int:
        return self.path.shape[1]

    def rows(self) -> np.ndarray:
        return np.argmax(self.path, axis=0)


@dataclasses.dataclass
class DurationVector:
    """Integer frames per phoneme; sums to the frame count, entries >= 1."""

    frames_per_phoneme: np.ndarray

    def __post_init__(self):
        self.frames_per_phoneme = np.asarray(self.frames_per_phoneme, dtype=np.int64)
        if self.frames_per_phoneme.ndim != 1:
            raise AlignmentError("durations must be a vector")
        if np.any(self.frames_per_phoneme < 1):
            raise AlignmentError("every duration must be >= 1")

    @property
    def total_frames(self) -> int:
        return int(self.frames_per_phoneme.sum())

    def __len__(self) -> int:
        return len(self.frames_per_phoneme)


class AlignMode(enum.Enum):
    SOFT = "soft"
    HARD = "hard"


@dataclasses.dataclass
class AlignmentMixPolicy:
    """Per-step Bernoulli choice between hard and soft alignment branches."""

    hard_ratio: float = 0.5
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.hard_ratio <= 1.0:
            raise AlignmentError("hard_ratio must lie in [0, 1]")


def mas_durations(log_weights: np.ndarray) -> np.ndarray:
    """Optimal monotonic surjective path through a log-weight matrix,
    returned as per-phoneme durations.

    Maximizes the path sum of log weights; ties prefer staying on the
    current phoneme (the path is lexicographically smallest in row index,
    read frame by frame).
    """
    n, t = log_weights.shape
    if n > t:
        raise InfeasibleAlignmentError(f"N={n} phonemes cannot cover T={t} frames")
    neg_inf = -np.inf
    # suffix[i, j]: best score of a path from (i, j) to (n-1, t-1), inclusive
    suffix = np.full((n, t), neg_inf)
    suffix[n - 1, t - 1] = log_weights[n - 1, t - 1]
    for j in range(t - 2, -1, -1):
        stay = suffix[:, j + 1]
        advance = np.concatenate((suffix[1:, j + 1], [neg_inf]))
        best = np.maximum(stay, advance)
        # feasibility: remaining phonemes must fit in remaining frames
        feasible = (n - 1 - np.arange(n)) <= (t - 1 - j)
        col = np.where(feasible, log_weights[:, j] + best, neg_inf)
        suffix[:, j] = col
    durations = np.zeros(n, dtype=np.int64)
    i = 0
    durations[0] = 1
    for j in range(1, t):
        stay = suffix[i, j] if (n - 1 - i) <= (t - 1 - j) else neg_inf
        advance = suffix[i + 1, j] if i + 1 < n else neg_inf
        if advance > stay:
            i += 1
        durations[i] += 1
    return durations


def monotonic_search_reference(soft: SoftAlignment) -> HardAlignment:
    """Reference dynamic program over monotonic surjective paths."""
    logw = np.log(soft.weights + MAS_EPS)
    durations = mas_durations(logw)
    return durations_to_alignment(DurationVector(durations))


def monotonic_search(soft: SoftAlignment) -> HardAlignment:
    """Backend-dispatched monotonic alignment search."""
    from . import masbackend

    durations = masbackend.get_backend().search(np.log(soft.weights + MAS_EPS))
    return durations_to_alignment(DurationVector(durations))


def _largest_remainder(real_durations: np.ndarray, total: int) -> np.ndarray:
    """Integerize non-negative reals to sum exactly to ``total``."""
    floors = np.floor(real_durations).astype(np.int64)
    remainder = int(total - floors.sum())
    if remainder > 0:
        frac = real_durations - floors
        # ties go to the lower index for determinism
        order = np.lexsort((np.arange(len(frac)), -frac))
        floors[order[:remainder]] += 1
    elif remainder < 0:
        frac = real_durations - floors
        order = np.lexsort((np.arange(len(frac)), frac))
        k = 0
        while remainder < 0 and k < len(order):
            if floors[order[k]] > 0:
                floors[order[k]] -= 1
                remainder += 1
            else:
                k += 1
    return floors


def repair_durations(real_durations: np.ndarray, total: int) -> np.ndarray:
    """Largest-remainder integerization followed by a min-1 repair."""
    d = _largest_remainder(np.asarray(real_durations, dtype=np.float64), total)
    if np.any(d < 1):
        warnings.warn(
            "degenerate duration entry clamped to 1", DegenerateDurationWarning
        )
        while np.any(d < 1):
            d[int(np.argmin(d))] += 1
            d[int(np.argmax(d))] -= 1
    return d


def soft_to_durations(a: SoftAlignment | HardAlignment) -> DurationVector:
    """Row sums; soft inputs are rounded and repaired to total exactly T."""
    if isinstance(a, HardAlignment):
        return DurationVector(a.path.sum(axis=1).astype(np.int64))
    sums = a.weights.sum(axis=1)
    d = repair_durations(sums, a.n_frames)
    return DurationVector(d)


def durations_to_alignment(d: DurationVector) -> HardAlignment:
    """Block one-hot expansion; exact inverse of hard-alignment row sums."""
    n = len(d)
    t = d.total_frames
    path = np.zeros((n, t), dtype=np.int64)
    pos = 0
    for i, dur in enumerate(d.frames_per_phoneme):
        path[i, pos : pos + dur] = 1
        pos += int(dur)
    return HardAlignment(path)


def mix_select(policy: AlignmentMixPolicy, step: int) -> AlignMode:
    """Deterministic Bernoulli(hard_ratio) draw keyed on (seed, step)."""
    rng = np.random.default_rng([policy.rng_seed & 0x7FFFFFFF, step])
    return AlignMode.HARD if rng.random() < policy.hard_ratio else AlignMode.SOFT


def mono_distance(soft: SoftAlignment, hard: HardAlignment) -> float:
    """Mean absolute elementwise difference."""
    if soft.weights.shape != hard.path.shape:
        raise AlignmentError("soft and hard alignments must share a shape")
    return float(np.mean(np.abs(soft.weights - hard.path)))
