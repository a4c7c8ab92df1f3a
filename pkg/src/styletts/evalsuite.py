"""Objective evaluation: reference-vs-synthesized acoustic-feature
correlations and style-vector speaker separability."""

from __future__ import annotations

import dataclasses
import math

import numpy as np

from . import dsp


class EvalError(Exception):
    pass


FEATURE_NAMES = dsp.AcousticFeatureSet.FEATURE_NAMES


@dataclasses.dataclass
class CorrelationReport:
    """Per-feature Pearson r across (reference, synthesized) pairs.

    ``correlations`` maps feature name -> r, with NaN marking features whose
    correlation is undefined (zero variance on either side)."""

    correlations: dict[str, float]
    sample_count: int
    reference_features: list[dsp.AcousticFeatureSet]
    synthesized_features: list[dsp.AcousticFeatureSet]

    def __post_init__(self):
        if self.sample_count < 3:
            raise EvalError("need at least 3 pairs")
        for r in self.correlations.values():
            if not math.isnan(r) and not -1.0 <= r <= 1.0:
                raise EvalError("correlation outside [-1, 1]")

    def to_csv(self) -> str:
        lines = ["feature," + ",".join(FEATURE_NAMES)]
        lines.append(
            "pearson_r,"
            + ",".join(
                "undefined" if math.isnan(self.correlations[n])
                else f"{self.correlations[n]:.6f}"
                for n in FEATURE_NAMES
            )
        )
        lines.append(dsp.AcousticFeatureSet.CSV_HEADER)
        for side, feats in (
            ("reference", self.reference_features),
            ("synthesized", self.synthesized_features),
        ):
            for i, f in enumerate(feats):
                vals = ",".join(f"{v:.6f}" for v in f.as_vector())
                lines.append(f"{side}_{i},{vals}")
        return "\n".join(lines) + "\n"


def _features_of(entry) -> dsp.AcousticFeatureSet:
    """Accepts an AudioClip or a MelSpectrogram (inverted via Griffin-Lim)."""
    if isinstance(entry, dsp.MelSpectrogram):
        clip = dsp.griffin_lim_invert(entry)
    elif isinstance(entry, dsp.AudioClip):
        clip = entry
    else:
        raise EvalError(f"cannot extract features from {type(entry).__name__}")
    mel = dsp.mel_spectrogram(clip)
    f0 = dsp.yin_f0(clip)
    return dsp.acoustic_features(clip, mel, f0)


def correlation_report(pairs: list[tuple]) -> CorrelationReport:
    """``pairs`` holds (reference, synthesized); each side is an AudioClip or
    a MelSpectrogram. Degenerate (zero-variance) features are reported as NaN
    while the rest proceed."""
    if len(pairs) < 3:
        raise EvalError("need at least 3 pairs")
    ref_feats = [_features_of(r) for r, _ in pairs]
    syn_feats = [_features_of(s) for _, s in pairs]
    correlations = {}
    for i, name in enumerate(FEATURE_NAMES):
        a = np.array([f.as_vector()[i] for f in ref_feats])
        b = np.array([f.as_vector()[i] for f in syn_feats])
        try:
            correlations[name] = dsp.pearson_correlation(a, b)
        except dsp.UndefinedCorrelationError:
            correlations[name] = float("nan")
    return CorrelationReport(
        correlations=correlations,
        sample_count=len(pairs),
        reference_features=ref_feats,
        synthesized_features=syn_feats,
    )


def style_separability(vectors: np.ndarray, labels: list) -> float:
    """Leave-one-out nearest-centroid classification accuracy.

    Requires at least two classes and at least two vectors per class (a
    left-out vector must leave a non-empty centroid behind)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = list(labels)
    if vectors.ndim != 2 or len(vectors) != len(labels):
        raise EvalError("vectors must be [n x d] with one label each")
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise EvalError("need at least 2 classes")
    counts = {c: labels.count(c) for c in classes}
    small = [c for c, n in counts.items() if n < 2]
    if small:
        raise EvalError(f"classes with < 2 vectors: {small}")

    correct = 0
    label_arr = np.array([classes.index(l) for l in labels])
    for i in range(len(vectors)):
        centroids = []
        for c in range(len(classes)):
            mask = (label_arr == c) & (np.arange(len(vectors)) != i)
            centroids.append(vectors[mask].mean(axis=0))
        dists = [np.linalg.norm(vectors[i] - c) for c in centroids]
        if int(np.argmin(dists)) == label_arr[i]:
            correct += 1
    return correct / len(vectors)
