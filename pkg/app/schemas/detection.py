from __future__ import annotations

from dataclasses import dataclass

from pydantic import Field

from .base import FrozenSchema


@dataclass(frozen=True)
class CandidateGci:
    location: float
    probability: float


class ClusterConfig(FrozenSchema):
    bin_size: int = Field(default=5, ge=1)
    threshold: float = Field(default=0.5, gt=0, lt=1)
    inference_shift: int = Field(default=1, ge=1)
    # Groups whose summed probability is below this are dropped. None => keep all.
    min_group_mass: float | None = Field(default=None, gt=0)
