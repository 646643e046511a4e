from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import Field, field_validator, model_validator

from .base import BaseSchema, FrozenSchema
from .detection import ClusterConfig
from .framing import FramingConfig
from .model import ModelConfig, TrainConfig

MIN_SNR_DB = -10.0
MAX_SNR_DB = 60.0
CLEAN = "clean"

SplitMode = Literal["utterance", "speaker", "dataset"]
# None means clean speech (no noise added).
Snr = Optional[float]


def parse_snr(token: str | float | None) -> Snr:
    if token is None:
        return None
    if isinstance(token, str):
        text = token.strip().lower()
        if text in {CLEAN, "none", ""}:
            return None
        return float(text)
    return float(token)


def format_snr(snr: Snr) -> str:
    if snr is None:
        return CLEAN
    return f"{snr:g}"


def _check_snr(value: Snr) -> Snr:
    if value is not None and not MIN_SNR_DB <= value <= MAX_SNR_DB:
        raise ValueError(f"SNR {value} dB outside [{MIN_SNR_DB}, {MAX_SNR_DB}] dB")
    return value


class ManifestEntry(FrozenSchema):
    """One corpus utterance. Reference GCIs come from `labels`, or from `egg` when absent."""

    utterance_id: str = Field(min_length=1)
    speech: Path
    egg: Optional[Path] = None
    labels: Optional[Path] = None
    speaker_id: str = ""
    dataset_id: str = ""

    @model_validator(mode="after")
    def _has_reference(self) -> "ManifestEntry":
        if self.egg is None and self.labels is None:
            raise ValueError(f"utterance {self.utterance_id!r} needs an egg or a labels file")
        return self


class CorpusConfig(BaseSchema):
    manifest: Path
    invert_egg: bool = False
    egg_min_period_ms: float = Field(default=2.0, gt=0)
    egg_prominence: float = Field(default=0.3, gt=0, le=1)


class NoiseConfig(BaseSchema):
    # "white" or a path to a mono WAV file.
    source: str = "white"
    snr_db: tuple[Snr, ...] = (None,)
    # Negatives kept per positive when building training data; inf keeps all.
    neg_to_pos_ratio: float = Field(default=math.inf, ge=0)

    @field_validator("snr_db", mode="before")
    @classmethod
    def _parse_snrs(cls, value):
        if isinstance(value, str):
            value = value.split(",")
        return tuple(parse_snr(token) for token in value)

    @field_validator("snr_db")
    @classmethod
    def _snrs_in_range(cls, value: tuple[Snr, ...]) -> tuple[Snr, ...]:
        return tuple(_check_snr(v) for v in value)


class SplitConfig(BaseSchema):
    mode: SplitMode = "utterance"
    train_fraction: float = Field(default=0.10, gt=0, lt=1)
    seed: int = 0
    # Speaker or dataset ids to train on; empty picks groups at random.
    train_groups: tuple[str, ...] = ()

    @field_validator("train_groups", mode="before")
    @classmethod
    def _split_groups(cls, value):
        if isinstance(value, str):
            value = [token for token in (part.strip() for part in value.split(",")) if token]
        return tuple(value)


class ConditionConfig(BaseSchema):
    """One results-table block: train at `train_snr`, score at each of `test_snrs`."""

    name: str = Field(min_length=1)
    train_snr: Snr = None
    test_snrs: tuple[Snr, ...] = (None,)
    split: Optional[SplitConfig] = None

    @field_validator("train_snr", mode="before")
    @classmethod
    def _parse_train_snr(cls, value):
        return parse_snr(value)

    @field_validator("test_snrs", mode="before")
    @classmethod
    def _parse_test_snrs(cls, value):
        if isinstance(value, str):
            value = value.split(",")
        return tuple(parse_snr(token) for token in value)

    @field_validator("train_snr")
    @classmethod
    def _train_snr_in_range(cls, value: Snr) -> Snr:
        return _check_snr(value)

    @field_validator("test_snrs")
    @classmethod
    def _test_snrs_in_range(cls, value: tuple[Snr, ...]) -> tuple[Snr, ...]:
        return tuple(_check_snr(v) for v in value)


class ExperimentConfig(BaseSchema):
    name: str = "experiment"
    # None => <GCINET_OUTPUT_ROOT>/<name>.
    output_dir: Optional[Path] = None
    seed: int = 7
    # Only the prepare stage reads the corpus.
    corpus: Optional[CorpusConfig] = None
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    framing: FramingConfig = Field(default_factory=FramingConfig)
    model: ModelConfig = Field(default_factory=ModelConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    cluster: ClusterConfig = Field(default_factory=ClusterConfig)
    split: SplitConfig = Field(default_factory=SplitConfig)
    conditions: list[ConditionConfig] = Field(default_factory=list)

    @model_validator(mode="after")
    def _conditions_are_prepared(self) -> "ExperimentConfig":
        names = [c.name for c in self.conditions]
        if len(names) != len(set(names)):
            raise ValueError("condition names must be unique")
        prepared = set(self.noise.snr_db)
        for condition in self.conditions:
            missing = ({condition.train_snr} | set(condition.test_snrs)) - prepared
            if missing:
                listed = ", ".join(format_snr(s) for s in sorted(missing, key=lambda s: -math.inf if s is None else s))
                raise ValueError(f"condition {condition.name!r} uses SNRs not in noise.snr_db: {listed}")
        return self

    def effective_conditions(self) -> list[ConditionConfig]:
        """Configured conditions, or one matched-SNR baseline per prepared SNR."""
        if self.conditions:
            return list(self.conditions)
        return [
            ConditionConfig(name=f"baseline_{format_snr(snr)}", train_snr=snr, test_snrs=(snr,))
            for snr in self.noise.snr_db
        ]

    def split_for(self, condition: ConditionConfig) -> SplitConfig:
        return condition.split or self.split
