"""
Second stage of detection: slide the model over an utterance, keep windows with
y_c >= threshold as candidate GCIs, then merge candidates with a
probability-weighted histogram. Each maximal run of non-empty bins becomes one
GCI at the probability-weighted mean of its candidates.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from app.core.errors import DataError, UsageError
from app.core.flow_logging import flow_info
from app.schemas.detection import CandidateGci, ClusterConfig
from app.schemas.model import ModelConfig
from app.schemas.signal import GciLabels, Waveform
from app.services.framing_service import slice_frames

logger = logging.getLogger(__name__)


class FrameScorer(Protocol):
    """Anything that maps (B, wi) frames to (y_c, y_r); a trained Model or a test stub."""

    config: ModelConfig

    def predict(self, frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


DEFAULT_INFERENCE_BATCH_SIZE = 1024


def predict_candidates(
    model: FrameScorer,
    w: Waveform,
    cfg: ClusterConfig,
    *,
    batch_size: int = DEFAULT_INFERENCE_BATCH_SIZE,
) -> list[CandidateGci]:
    """
    Score every frame at hop `cfg.inference_shift`, `batch_size` frames per
    forward call. Batching changes float summation order, so probabilities can
    differ across batch sizes by rounding (around 1e-15).
    """
    wi = model.config.wi_samples
    context = model.config.context_samples
    if len(w) < wi:
        raise DataError(
            code="SIGNAL_TOO_SHORT",
            message=f"Signal of {len(w)} samples is shorter than one {wi}-sample frame.",
        )
    origins = np.arange(0, len(w) - wi + 1, cfg.inference_shift, dtype=np.int64)
    batch_size = max(1, batch_size)

    locations: list[np.ndarray] = []
    probabilities: list[np.ndarray] = []
    for start in range(0, len(origins), batch_size):
        batch_origins = origins[start : start + batch_size]
        y_c, y_r = model.predict(slice_frames(w.samples, batch_origins, wi))
        keep = y_c >= cfg.threshold
        locations.append(batch_origins[keep] + context + y_r[keep])
        probabilities.append(y_c[keep])

    location = np.concatenate(locations) if locations else np.zeros(0)
    probability = np.concatenate(probabilities) if probabilities else np.zeros(0)
    inside = location < len(w)
    if not np.all(inside):
        logger.debug("candidates_past_end dropped=%d", int(np.count_nonzero(~inside)))
    location, probability = location[inside], probability[inside]
    order = np.argsort(location, kind="stable")
    return [CandidateGci(location=float(location[i]), probability=float(probability[i])) for i in order]


def _as_arrays(cands: Sequence[CandidateGci]) -> tuple[np.ndarray, np.ndarray]:
    location = np.fromiter((c.location for c in cands), dtype=np.float64, count=len(cands))
    probability = np.fromiter((c.probability for c in cands), dtype=np.float64, count=len(cands))
    return location, probability


def weighted_histogram(cands: Sequence[CandidateGci], bin_size: int, signal_length: int) -> np.ndarray:
    """Bin k holds the summed probability of candidates with floor(location) in [kB, (k+1)B)."""
    if bin_size < 1:
        raise UsageError(code="BAD_BIN_SIZE", message=f"bin_size must be >= 1, got {bin_size}.")
    location, probability = _as_arrays(cands)
    n_bins = max(1, math.ceil(signal_length / bin_size))
    bins = np.floor(location).astype(np.int64) // bin_size
    return np.bincount(bins, weights=probability, minlength=n_bins)


def cluster_candidates(cands: Sequence[CandidateGci], cfg: ClusterConfig, signal_length: int) -> GciLabels:
    """
    One GCI per maximal run of non-empty histogram bins, at floor(mean + 0.5)
    of the group's probability-weighted mean location.

    With integer candidates the result stays inside the group's span. With
    fractional ones the rounding can step past it: a lone candidate at 100.6
    gives 101.
    """
    if not cands:
        return GciLabels(np.zeros(0, dtype=np.int64))
    location, probability = _as_arrays(cands)
    histogram = weighted_histogram(cands, cfg.bin_size, signal_length)

    occupied = histogram > 0
    run_starts = occupied & ~np.concatenate(([False], occupied[:-1]))
    bin_group = np.cumsum(run_starts) - 1
    groups = bin_group[np.floor(location).astype(np.int64) // cfg.bin_size]

    n_groups = int(groups.max()) + 1
    mass = np.bincount(groups, weights=probability, minlength=n_groups)
    moment = np.bincount(groups, weights=probability * location, minlength=n_groups)
    keep = mass > 0
    if cfg.min_group_mass is not None:
        keep &= mass >= cfg.min_group_mass
        logger.debug("clusters_pruned n=%d min_group_mass=%s", int(np.count_nonzero(~keep)), cfg.min_group_mass)
    means = moment[keep] / mass[keep]
    # Round half up so x.5 always moves later in time.
    positions = np.unique(np.floor(means + 0.5).astype(np.int64))
    return GciLabels(positions)


def detect_with_candidates(
    model: FrameScorer,
    w: Waveform,
    cfg: ClusterConfig,
    *,
    batch_size: int = DEFAULT_INFERENCE_BATCH_SIZE,
) -> tuple[GciLabels, list[CandidateGci]]:
    cands = predict_candidates(model, w, cfg, batch_size=batch_size)
    labels = cluster_candidates(cands, cfg, len(w))
    flow_info(
        logger,
        "detect_done samples=%d candidates=%d gcis=%d",
        len(w),
        len(cands),
        len(labels),
        category="inference",
    )
    return labels, cands


def detect(
    model: FrameScorer,
    w: Waveform,
    cfg: ClusterConfig,
    *,
    batch_size: int = DEFAULT_INFERENCE_BATCH_SIZE,
) -> GciLabels:
    labels, _ = detect_with_candidates(model, w, cfg, batch_size=batch_size)
    return labels


def write_candidates(cands: Sequence[CandidateGci], path: str | Path) -> None:
    """One `location probability` pair per line, ordered by location."""
    lines = [f"{c.location:.6f} {c.probability:.6f}\n" for c in cands]
    Path(path).write_text("".join(lines), encoding="utf-8", newline="\n")
