from __future__ import annotations

import math

import numpy as np
import pytest

from app.core.errors import DataError, UsageError
from app.schemas.detection import CandidateGci, ClusterConfig
from app.schemas.model import ModelConfig
from app.schemas.signal import GciLabels, Waveform
from app.services.detection_service import (
    cluster_candidates,
    detect,
    detect_with_candidates,
    predict_candidates,
    weighted_histogram,
    write_candidates,
)
from app.services.model_service import build_model


class SilentScorer:
    config = ModelConfig()

    def predict(self, frames):
        return np.zeros(len(frames)), np.zeros(len(frames))


class OracleScorer:
    """
    Scores frames of a ramp signal (sample value == sample index), so the
    origin of each frame can be read off its first sample.
    """

    config = ModelConfig()

    def __init__(self, labels: np.ndarray, probability: float = 0.9):
        self.labels = labels
        self.probability = probability

    def predict(self, frames):
        origins = frames[:, 0].astype(np.int64)
        start = origins + self.config.context_samples
        following = np.searchsorted(self.labels, start, side="left")
        nearest = self.labels[np.minimum(following, len(self.labels) - 1)]
        hit = (following < len(self.labels)) & (nearest < start + self.config.wd_samples)
        y_c = np.where(hit, self.probability, 0.1)
        y_r = np.where(hit, nearest - start, 0).astype(np.float64)
        return y_c, y_r


def _ramp(length: int) -> Waveform:
    return Waveform(samples=np.arange(length, dtype=np.float64), sample_rate=16000)


def _cands(locations, probabilities=None):
    probabilities = probabilities if probabilities is not None else [0.9] * len(locations)
    return [CandidateGci(location=float(loc), probability=float(p)) for loc, p in zip(locations, probabilities)]


def _brute_force_clusters(cands, bin_size):
    """Sort, split where bins are neither equal nor adjacent, weighted mean, round half up."""
    ordered = sorted(cands, key=lambda c: c.location)
    groups, current, last_bin = [], [], None
    for c in ordered:
        b = math.floor(c.location) // bin_size
        if last_bin is not None and b - last_bin > 1:
            groups.append(current)
            current = []
        current.append(c)
        last_bin = b
    if current:
        groups.append(current)
    out = set()
    for group in groups:
        mass = sum(c.probability for c in group)
        mean = sum(c.probability * c.location for c in group) / mass
        out.add(math.floor(mean + 0.5))
    return sorted(out)


def test_silent_scorer_finds_nothing():
    w = Waveform(samples=np.zeros(1000), sample_rate=16000)
    labels, cands = detect_with_candidates(SilentScorer(), w, ClusterConfig())

    assert cands == []
    assert len(labels) == 0


def test_oracle_scorer_recovers_labels():
    truth = np.array([300, 428, 560, 700, 830])
    w = _ramp(1200)
    labels, cands = detect_with_candidates(OracleScorer(truth), w, ClusterConfig())

    assert labels.tolist() == truth.tolist()
    # One candidate per window whose detection window covers a GCI.
    assert len(cands) == 32 * len(truth)
    assert all(c.location == int(c.location) for c in cands)
    assert [c.location for c in cands] == sorted(c.location for c in cands)


def test_coarser_shift_still_finds_every_gci():
    truth = np.array([300, 428, 560])
    labels = detect(OracleScorer(truth), _ramp(900), ClusterConfig(inference_shift=4))

    assert labels.tolist() == truth.tolist()


def test_batch_size_does_not_change_candidates():
    truth = np.array([300, 428, 560])
    w = _ramp(900)
    reference = predict_candidates(OracleScorer(truth), w, ClusterConfig())

    assert predict_candidates(OracleScorer(truth), w, ClusterConfig(), batch_size=7) == reference


def test_real_model_agrees_across_batch_sizes_up_to_rounding(small_model_config, rng):
    model = build_model(small_model_config, seed=0)
    w = Waveform(samples=rng.standard_normal(2000), sample_rate=16000)
    cfg = ClusterConfig(threshold=1e-6)

    whole = predict_candidates(model, w, cfg, batch_size=1024)
    chunked = predict_candidates(model, w, cfg, batch_size=7)

    assert len(whole) == len(chunked) > 0
    np.testing.assert_allclose([c.location for c in chunked], [c.location for c in whole], rtol=0, atol=1e-9)
    np.testing.assert_allclose([c.probability for c in chunked], [c.probability for c in whole], rtol=0, atol=1e-12)


def test_threshold_is_inclusive():
    truth = np.array([300])
    w = _ramp(600)

    assert len(predict_candidates(OracleScorer(truth, probability=0.5), w, ClusterConfig(threshold=0.5))) == 32
    assert predict_candidates(OracleScorer(truth, probability=0.5), w, ClusterConfig(threshold=0.51)) == []


def test_signal_shorter_than_frame():
    with pytest.raises(DataError) as exc_info:
        predict_candidates(SilentScorer(), _ramp(100), ClusterConfig())
    assert exc_info.value.code == "SIGNAL_TOO_SHORT"


def test_three_close_candidates_merge():
    labels = cluster_candidates(_cands([100, 102, 104]), ClusterConfig(bin_size=5), 1000)
    assert labels.tolist() == [102]


def test_separated_candidates_stay_apart():
    labels = cluster_candidates(_cands([100, 101, 300, 302]), ClusterConfig(bin_size=5), 1000)
    assert labels.tolist() == [101, 301]


def test_half_sample_mean_rounds_up():
    labels = cluster_candidates(_cands([100, 101]), ClusterConfig(bin_size=5), 1000)
    assert labels.tolist() == [101]


def test_fractional_candidate_can_round_past_its_group():
    labels = cluster_candidates(_cands([100.6]), ClusterConfig(bin_size=5), 1000)
    assert labels.tolist() == [101]


def test_weighted_mean_follows_probability():
    labels = cluster_candidates(_cands([100, 109], [0.9, 0.1]), ClusterConfig(bin_size=5), 1000)
    assert labels.tolist() == [101]


def test_histogram_conserves_mass(rng):
    for _ in range(100):
        n = int(rng.integers(1, 50))
        cands = _cands(rng.uniform(0, 999.9, size=n), rng.uniform(0.5, 1.0, size=n))
        histogram = weighted_histogram(cands, int(rng.integers(1, 12)), 1000)

        assert histogram.sum() == pytest.approx(sum(c.probability for c in cands), rel=1e-12)


def test_histogram_bin_edges():
    histogram = weighted_histogram(_cands([0.0, 4.99, 5.0], [0.5, 0.25, 1.0]), 5, 12)

    np.testing.assert_allclose(histogram, [0.75, 1.0, 0.0])


def test_bad_bin_size():
    with pytest.raises(UsageError) as exc_info:
        weighted_histogram(_cands([1.0]), 0, 10)
    assert exc_info.value.code == "BAD_BIN_SIZE"


def test_clustering_matches_brute_force(rng):
    for _ in range(1000):
        n = int(rng.integers(1, 40))
        bin_size = int(rng.integers(1, 10))
        cands = _cands(rng.uniform(0, 500, size=n), rng.uniform(0.5, 1.0, size=n))
        labels = cluster_candidates(cands, ClusterConfig(bin_size=bin_size), 500)

        assert labels.tolist() == _brute_force_clusters(cands, bin_size)


def test_coarser_bins_never_add_gcis(rng):
    # Each size is a multiple of the previous one, so bins only ever merge.
    for _ in range(200):
        n = int(rng.integers(1, 40))
        cands = _cands(rng.integers(0, 500, size=n), rng.uniform(0.5, 1.0, size=n))
        counts = [len(cluster_candidates(cands, ClusterConfig(bin_size=b), 500)) for b in (5, 10, 20, 40)]
        assert len(cluster_candidates(cands, ClusterConfig(bin_size=50), 500)) <= counts[0]

        assert all(a >= b for a, b in zip(counts, counts[1:]))


def test_integer_candidates_land_inside_their_group(rng):
    for _ in range(200):
        n = int(rng.integers(1, 30))
        locations = np.sort(rng.integers(0, 400, size=n))
        cands = _cands(locations, rng.uniform(0.5, 1.0, size=n))
        labels = cluster_candidates(cands, ClusterConfig(bin_size=4), 400)

        assert len(labels) <= n
        assert all(locations.min() <= value <= locations.max() for value in labels)


def test_uniform_probability_scaling_keeps_labels(rng):
    for _ in range(100):
        n = int(rng.integers(1, 30))
        locations = rng.integers(0, 400, size=n)
        probabilities = rng.uniform(0.5, 1.0, size=n)
        a = cluster_candidates(_cands(locations, probabilities), ClusterConfig(), 400)
        b = cluster_candidates(_cands(locations, 0.5 * probabilities), ClusterConfig(), 400)

        assert a == b


def test_min_group_mass_drops_weak_groups():
    cands = _cands([100, 101, 102, 300], [0.9, 0.9, 0.9, 0.6])

    assert cluster_candidates(cands, ClusterConfig(), 1000).tolist() == [101, 300]
    assert cluster_candidates(cands, ClusterConfig(min_group_mass=1.0), 1000).tolist() == [101]


def test_no_candidates_no_gcis():
    assert cluster_candidates([], ClusterConfig(), 1000) == GciLabels(np.zeros(0, dtype=np.int64))


def test_write_candidates(tmp_path):
    path = tmp_path / "cands.txt"
    write_candidates(_cands([10.25, 12.0], [0.75, 0.5]), path)

    assert path.read_text(encoding="utf-8") == "10.250000 0.750000\n12.000000 0.500000\n"
