from __future__ import annotations

from dataclasses import dataclass

from pydantic import Field

from app.core.errors import UsageError
from .base import FrozenSchema
from .signal import ms_to_samples


@dataclass(frozen=True)
class FrameGeometry:
    """Framing sizes in samples for one sample rate."""

    wd: int
    context: int
    shift: int

    @property
    def wi(self) -> int:
        return self.wd + 2 * self.context


class FramingConfig(FrozenSchema):
    wd_ms: float = Field(default=2.0, gt=0)
    context_ms: float = Field(default=5.0, ge=0)
    shift_samples: int = Field(default=1, ge=1)

    def geometry(self, sample_rate: int) -> FrameGeometry:
        wd = ms_to_samples(self.wd_ms, sample_rate)
        if wd <= 0:
            raise UsageError(
                code="BAD_FRAMING",
                message=f"wd_ms={self.wd_ms} rounds to {wd} samples at {sample_rate} Hz.",
            )
        return FrameGeometry(
            wd=wd,
            context=ms_to_samples(self.context_ms, sample_rate),
            shift=self.shift_samples,
        )
