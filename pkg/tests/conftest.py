import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sine_clip(freq, seconds=1.0, fs=24000, amp=0.5):
    from styletts import dsp

    t = np.arange(int(seconds * fs)) / fs
    return dsp.AudioClip(samples=amp * np.sin(2 * np.pi * freq * t), sample_rate=fs)


def random_soft(rng, n, t):
    from styletts import alignment

    w = rng.random((n, t)) + 1e-3
    return alignment.SoftAlignment(w / w.sum(axis=0, keepdims=True))


def brute_force_mas(log_weights):
    """Exhaustive search over all monotonic surjective paths.

    Maximizes the summed log weight; ties resolve to the lexicographically
    smallest row sequence (i.e. prefer staying on the current phoneme).
    Returns per-phoneme durations.
    """
    import itertools

    n, t = log_weights.shape
    assert n <= t
    best_score = -np.inf
    best_rows = None
    # a path is determined by the n-1 columns where the row advances
    for advances in itertools.combinations(range(1, t), n - 1):
        rows = np.zeros(t, dtype=int)
        for col in advances:
            rows[col:] += 1
        score = log_weights[rows, np.arange(t)].sum()
        if score > best_score or (
            score == best_score
            and best_rows is not None
            and tuple(rows) < tuple(best_rows)
        ):
            best_score = score
            best_rows = rows
    durations = np.bincount(best_rows, minlength=n)
    return durations
