from __future__ import annotations

from typing import Literal

from pydantic import Field, PositiveFloat, model_validator

from .base import FrozenSchema


class ModelConfig(FrozenSchema):
    num_conv_layers: int = Field(default=4, ge=1)
    kernel_size: int = Field(default=5, ge=1)
    channels: int = Field(default=32, ge=1)
    # None => doubling per layer, capped so every layer fits the shrinking time axis.
    dilations: tuple[int, ...] | None = None
    head_hidden: int = Field(default=64, ge=1)
    wd_samples: int = Field(default=32, ge=1)
    wi_samples: int = Field(default=192, ge=1)
    input_scale: Literal["none", "max_abs"] = "max_abs"

    @model_validator(mode="after")
    def _check_shapes(self) -> "ModelConfig":
        if self.dilations is not None:
            if len(self.dilations) != self.num_conv_layers:
                raise ValueError("dilations must have one entry per conv layer")
            if any(d < 1 for d in self.dilations):
                raise ValueError("dilations must be >= 1")
        spare = self.wi_samples - self.wd_samples
        if spare < 0 or spare % 2:
            raise ValueError("wi_samples - wd_samples must be a non-negative even number")
        return self

    @property
    def context_samples(self) -> int:
        return (self.wi_samples - self.wd_samples) // 2


class TrainConfig(FrozenSchema):
    batch_size: int = Field(default=256, ge=1)
    epochs: int = Field(default=20, ge=0)
    w_c: PositiveFloat = 1.0
    w_r: PositiveFloat = 10.0
    seed: int = 7
    prob_clip: float = Field(default=1e-7, gt=0, lt=0.5)
    learning_rate: float = Field(default=2e-3, ge=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    epsilon: float = Field(default=1e-8, gt=0)
