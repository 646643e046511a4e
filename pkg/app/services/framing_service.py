"""
Supervised frame generation: every input frame (w_i) is a detection window
(w_d) plus symmetric context, labelled with (t_c, t_r) for the GCI, if any,
inside its detection window.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence, TypeVar

import numpy as np

from app.core.binary_container import Container, read_container, write_container
from app.core.errors import DataError, UsageError
from app.schemas.framing import FrameGeometry, FramingConfig
from app.schemas.signal import GciLabels, Waveform

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"GCIF"
CACHE_VERSION = 1

SplitMode = Literal["utterance", "speaker", "dataset"]
T = TypeVar("T")


@dataclass(frozen=True, eq=False)
class FrameRecord:
    frame: np.ndarray
    t_c: int
    t_r: float
    origin: int


@dataclass(frozen=True, eq=False)
class FrameDataset:
    """
    Records are stored as (origin, t_c, t_r) over the source signal; a record's
    frame is the verbatim slice signal[origin : origin + wi].
    """

    config: FramingConfig
    sample_rate: int
    signal: np.ndarray
    origins: np.ndarray
    t_c: np.ndarray
    t_r: np.ndarray

    @property
    def geometry(self) -> FrameGeometry:
        return self.config.geometry(self.sample_rate)

    def __len__(self) -> int:
        return int(self.origins.shape[0])

    @property
    def n_positive(self) -> int:
        return int(np.count_nonzero(self.t_c))

    def frames(self, indices: np.ndarray | None = None) -> np.ndarray:
        origins = self.origins if indices is None else self.origins[indices]
        return slice_frames(self.signal, origins, self.geometry.wi)

    def record(self, index: int) -> FrameRecord:
        origin = int(self.origins[index])
        return FrameRecord(
            frame=self.signal[origin : origin + self.geometry.wi].copy(),
            t_c=int(self.t_c[index]),
            t_r=float(self.t_r[index]),
            origin=origin,
        )

    def subset(self, indices: np.ndarray) -> "FrameDataset":
        return FrameDataset(
            config=self.config,
            sample_rate=self.sample_rate,
            signal=self.signal,
            origins=self.origins[indices],
            t_c=self.t_c[indices],
            t_r=self.t_r[indices],
        )


def frame_geometry(cfg: FramingConfig, sample_rate: int) -> FrameGeometry:
    return cfg.geometry(sample_rate)


def slice_frames(samples: np.ndarray, origins: np.ndarray, width: int) -> np.ndarray:
    return samples[origins[:, None] + np.arange(width)[None, :]]


def frame_origins(length: int, geometry: FrameGeometry, shift: int | None = None) -> np.ndarray:
    step = geometry.shift if shift is None else shift
    return np.arange(0, length - geometry.wi + 1, step, dtype=np.int64)


def make_frames(w: Waveform, labels: GciLabels, cfg: FramingConfig) -> FrameDataset:
    geometry = cfg.geometry(w.sample_rate)
    if len(w) < geometry.wi:
        raise DataError(
            code="SIGNAL_TOO_SHORT",
            message=f"Signal of {len(w)} samples is shorter than one {geometry.wi}-sample frame.",
        )
    # Two labels inside one detection window means corrupt ground truth.
    labels.check_against(len(w), min_spacing=geometry.wd)

    origins = frame_origins(len(w), geometry)
    window_start = origins + geometry.context
    positions = labels.positions
    if len(positions):
        following = np.searchsorted(positions, window_start, side="left")
        nearest = positions[np.minimum(following, len(positions) - 1)]
        hit = (following < len(positions)) & (nearest < window_start + geometry.wd)
        t_r = np.where(hit, nearest - window_start, 0).astype(np.float64)
    else:
        hit = np.zeros(len(origins), dtype=bool)
        t_r = np.zeros(len(origins), dtype=np.float64)

    return FrameDataset(
        config=cfg,
        sample_rate=w.sample_rate,
        signal=np.array(w.samples),
        origins=origins,
        t_c=hit.astype(np.uint8),
        t_r=t_r,
    )


def class_balance_subsample(ds: FrameDataset, neg_to_pos_ratio: float, seed: int) -> FrameDataset:
    if math.isinf(neg_to_pos_ratio):
        return ds
    if neg_to_pos_ratio < 0 or math.isnan(neg_to_pos_ratio):
        raise UsageError(code="BAD_RATIO", message=f"neg_to_pos_ratio must be >= 0, got {neg_to_pos_ratio}.")
    positives = np.flatnonzero(ds.t_c == 1)
    negatives = np.flatnonzero(ds.t_c == 0)
    if len(positives) == 0:
        raise DataError(code="NO_POSITIVES", message="Cannot balance a dataset without positive records.")
    keep = min(len(negatives), int(math.floor(neg_to_pos_ratio * len(positives))))
    rng = np.random.default_rng(seed)
    chosen = rng.choice(negatives, size=keep, replace=False)
    return ds.subset(np.sort(np.concatenate([positives, chosen])))


def concat_datasets(datasets: Sequence[FrameDataset]) -> FrameDataset:
    if not datasets:
        raise DataError(code="EMPTY_DATASET", message="No datasets to concatenate.")
    first = datasets[0]
    for ds in datasets[1:]:
        if ds.config != first.config or ds.sample_rate != first.sample_rate:
            raise DataError(
                code="DATASET_MISMATCH",
                message="Datasets with different framing or sample rate cannot be combined.",
            )
    offsets = np.cumsum([0] + [len(ds.signal) for ds in datasets[:-1]])
    return FrameDataset(
        config=first.config,
        sample_rate=first.sample_rate,
        signal=np.concatenate([ds.signal for ds in datasets]),
        origins=np.concatenate([ds.origins + offset for ds, offset in zip(datasets, offsets)]),
        t_c=np.concatenate([ds.t_c for ds in datasets]),
        t_r=np.concatenate([ds.t_r for ds in datasets]),
    )


def train_test_split(
    utterances: Sequence[T],
    train_fraction: float = 0.10,
    mode: SplitMode = "utterance",
    seed: int = 0,
    *,
    train_groups: Sequence[str] | None = None,
) -> tuple[list[T], list[T]]:
    """
    Split whole utterances. In speaker/dataset mode the unit is the group named
    by `speaker_id`/`dataset_id`; explicit `train_groups` override the random pick.
    """
    if not 0.0 < train_fraction < 1.0:
        raise UsageError(code="BAD_TRAIN_FRACTION", message=f"train_fraction must be in (0, 1), got {train_fraction}.")
    if not utterances:
        raise DataError(code="EMPTY_CORPUS", message="Cannot split an empty utterance list.")
    rng = np.random.default_rng(seed)

    if mode == "utterance":
        n_train = max(1, int(math.floor(train_fraction * len(utterances) + 0.5)))
        chosen = set(rng.permutation(len(utterances))[:n_train].tolist())
        train = [u for i, u in enumerate(utterances) if i in chosen]
        test = [u for i, u in enumerate(utterances) if i not in chosen]
        return train, test

    if mode not in {"speaker", "dataset"}:
        raise UsageError(code="BAD_SPLIT_MODE", message=f"Unknown split mode {mode!r}.")
    attribute = "speaker_id" if mode == "speaker" else "dataset_id"
    keys = [str(getattr(u, attribute, "") or "") for u in utterances]
    if any(not key for key in keys):
        raise DataError(code="MISSING_GROUP_ID", message=f"Every utterance needs a {attribute} for {mode} mode.")
    groups = sorted(set(keys))

    if train_groups:
        selected = set(train_groups)
        unknown = selected - set(groups)
        if unknown:
            raise DataError(code="UNKNOWN_GROUP", message=f"Unknown {attribute} values: {sorted(unknown)}.")
    else:
        n_train = max(1, int(math.floor(train_fraction * len(groups) + 0.5)))
        selected = {groups[i] for i in rng.permutation(len(groups))[:n_train]}

    train = [u for u, key in zip(utterances, keys) if key in selected]
    test = [u for u, key in zip(utterances, keys) if key not in selected]
    logger.debug("split_done mode=%s train_groups=%s n_train=%d n_test=%d", mode, sorted(selected), len(train), len(test))
    return train, test


def save_dataset_cache(ds: FrameDataset, path: str | Path) -> None:
    container = Container(
        meta={
            "framing": ds.config.model_dump(),
            "sample_rate": ds.sample_rate,
        },
        arrays={
            "signal": ds.signal,
            "origins": ds.origins,
            "t_c": ds.t_c,
            "t_r": ds.t_r,
        },
    )
    write_container(path, CACHE_MAGIC, CACHE_VERSION, container)


def load_dataset_cache(path: str | Path) -> FrameDataset:
    container = read_container(path, magic=CACHE_MAGIC, version=CACHE_VERSION)
    arrays = container.arrays
    return FrameDataset(
        config=FramingConfig.model_validate(container.meta["framing"]),
        sample_rate=int(container.meta["sample_rate"]),
        signal=arrays["signal"],
        origins=arrays["origins"],
        t_c=arrays["t_c"],
        t_r=arrays["t_r"],
    )
