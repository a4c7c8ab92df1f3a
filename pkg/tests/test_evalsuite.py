import math

import numpy as np
import pytest

from styletts import dsp, evalsuite, toydata


def _clip(transcript, speaker, seed):
    return toydata.render_utterance(
        transcript, speaker, rng=np.random.default_rng(seed))


@pytest.fixture(scope="module")
def clips():
    return [_clip(t, s, i) for i, (t, s) in enumerate(
        [("abc", "spk0"), ("dce", "spk1"), ("fga", "spk0"),
         ("bbd", "spk1"), ("egf", "spk0")])]


class TestCorrelationReport:
    def test_self_pairs_perfect_correlation(self, clips):
        report = evalsuite.correlation_report([(c, c) for c in clips])
        assert report.sample_count == 5
        for name, r in report.correlations.items():
            if not math.isnan(r):
                assert r == pytest.approx(1.0, abs=1e-9), name
        assert not math.isnan(report.correlations["pitch_mean"])

    def test_too_few_pairs(self, clips):
        with pytest.raises(evalsuite.EvalError, match="3 pairs"):
            evalsuite.correlation_report([(clips[0], clips[0])] * 2)

    def test_amplitude_scaling_preserves_pitch_correlation(self, clips):
        pairs = [
            (c, dsp.AudioClip(samples=0.5 * c.samples,
                              sample_rate=c.sample_rate))
            for c in clips
        ]
        report = evalsuite.correlation_report(pairs)
        assert report.correlations["pitch_mean"] == pytest.approx(1.0, abs=1e-3)

    def test_symmetry_of_magnitude(self, clips):
        pairs = [(clips[i], clips[(i + 1) % len(clips)])
                 for i in range(len(clips))]
        fwd = evalsuite.correlation_report(pairs)
        rev = evalsuite.correlation_report([(b, a) for a, b in pairs])
        for name in evalsuite.FEATURE_NAMES:
            a, b = fwd.correlations[name], rev.correlations[name]
            if math.isnan(a):
                assert math.isnan(b)
            else:
                assert a == pytest.approx(b, abs=1e-9)

    def test_mel_input_accepted(self, clips):
        pairs = [(c, dsp.mel_spectrogram(c)) for c in clips[:3]]
        report = evalsuite.correlation_report(pairs)
        assert report.sample_count == 3

    def test_unsupported_input_rejected(self, clips):
        with pytest.raises(evalsuite.EvalError, match="ndarray"):
            evalsuite.correlation_report(
                [(clips[0], np.zeros(8))] * 3)

    def test_csv_layout(self, clips):
        report = evalsuite.correlation_report([(c, c) for c in clips[:3]])
        lines = report.to_csv().splitlines()
        assert lines[0] == "feature," + ",".join(evalsuite.FEATURE_NAMES)
        assert lines[1].startswith("pearson_r,")
        assert len(lines) == 3 + 2 * 3

    def test_degenerate_feature_reported_as_nan(self, monkeypatch, clips):
        original = dsp.acoustic_features

        def flattened(clip, mel, f0):
            feats = original(clip, mel, f0)
            return dsp.AcousticFeatureSet(
                **{**{n: getattr(feats, n) for n in evalsuite.FEATURE_NAMES},
                   "pitch_mean": 100.0})

        monkeypatch.setattr(dsp, "acoustic_features", flattened)
        report = evalsuite.correlation_report([(c, c) for c in clips[:3]])
        assert math.isnan(report.correlations["pitch_mean"])
        assert not math.isnan(report.correlations["energy_mean"])
        assert "undefined" in report.to_csv()


class TestStyleSeparability:
    def test_separated_clusters_scores_one(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0.0, 0.05, size=(6, 8))
        b = rng.normal(5.0, 0.05, size=(6, 8))
        vectors = np.vstack([a, b])
        labels = ["a"] * 6 + ["b"] * 6
        assert evalsuite.style_separability(vectors, labels) == 1.0

    def test_random_labels_near_chance(self):
        rng = np.random.default_rng(1)
        vectors = rng.normal(size=(200, 4))
        labels = ["a", "b"] * 100
        acc = evalsuite.style_separability(vectors, labels)
        assert 0.3 <= acc <= 0.7

    def test_bounded_and_reproducible(self):
        rng = np.random.default_rng(2)
        vectors = rng.normal(size=(10, 3))
        labels = ["x"] * 5 + ["y"] * 5
        acc = evalsuite.style_separability(vectors, labels)
        assert 0.0 <= acc <= 1.0
        assert acc == evalsuite.style_separability(vectors, labels)

    def test_single_class_rejected(self):
        with pytest.raises(evalsuite.EvalError, match="2 classes"):
            evalsuite.style_separability(np.zeros((4, 2)), ["a"] * 4)

    def test_singleton_class_rejected(self):
        with pytest.raises(evalsuite.EvalError, match="< 2 vectors"):
            evalsuite.style_separability(
                np.zeros((3, 2)), ["a", "a", "b"])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(evalsuite.EvalError):
            evalsuite.style_separability(np.zeros((3, 2)), ["a", "b"])
