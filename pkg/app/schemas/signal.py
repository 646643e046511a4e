from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np
from pydantic import Field, field_validator

from app.core.errors import DataError
from .base import FrozenSchema

MIN_PITCH_PERIOD_MS = 2.0
MAX_PITCH_PERIOD_MS = 20.0
DEFAULT_SAMPLE_RATE = 16000


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono signal plus its sample rate. Samples are stored as read-only float64."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise DataError(code="WAVEFORM_NOT_MONO", message="Waveform samples must be one-dimensional.")
        if int(self.sample_rate) <= 0:
            raise DataError(code="BAD_SAMPLE_RATE", message=f"Sample rate must be positive, got {self.sample_rate}.")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return int(self.samples.shape[0])


def ms_to_samples(ms: float, sample_rate: int) -> int:
    return int(round(ms * sample_rate / 1000.0))


@dataclass(frozen=True, eq=False)
class GciLabels:
    """Strictly increasing GCI sample indices for one waveform."""

    positions: np.ndarray

    def __post_init__(self) -> None:
        raw = np.asarray(self.positions)
        if raw.size == 0:
            positions = np.zeros(0, dtype=np.int64)
        else:
            if raw.ndim != 1:
                raise DataError(code="LABELS_NOT_1D", message="Label positions must be one-dimensional.")
            if raw.dtype.kind == "f" and not np.all(np.isfinite(raw) & (raw == np.round(raw))):
                raise DataError(code="LABELS_NOT_INTEGER", message="Label positions must be integers.")
            if raw.dtype.kind not in {"i", "u", "f"}:
                raise DataError(code="LABELS_NOT_INTEGER", message="Label positions must be integers.")
            positions = raw.astype(np.int64)
            if positions[0] < 0:
                raise DataError(code="LABELS_NEGATIVE", message="Label positions must be non-negative.")
            if np.any(np.diff(positions) <= 0):
                raise DataError(code="LABELS_NOT_MONOTONE", message="Label positions must be strictly increasing.")
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

    def __len__(self) -> int:
        return int(self.positions.shape[0])

    def __iter__(self) -> Iterator[int]:
        return (int(value) for value in self.positions)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GciLabels):
            return NotImplemented
        return np.array_equal(self.positions, other.positions)

    def tolist(self) -> list[int]:
        return [int(value) for value in self.positions]

    def check_against(self, length: int, *, min_spacing: int | None = None) -> None:
        if len(self) and self.positions[-1] >= length:
            raise DataError(
                code="LABEL_OUT_OF_RANGE",
                message=f"Label {int(self.positions[-1])} is outside a signal of length {length}.",
            )
        if min_spacing is not None and len(self) > 1:
            gaps = np.diff(self.positions)
            if np.any(gaps < min_spacing):
                first = int(np.argmax(gaps < min_spacing))
                raise DataError(
                    code="LABELS_TOO_CLOSE",
                    message=(
                        f"Labels {int(self.positions[first])} and {int(self.positions[first + 1])} "
                        f"are closer than {min_spacing} samples."
                    ),
                )


class SynthSpec(FrozenSchema):
    duration: float = Field(gt=0, description="Seconds.")
    # Pitch periods in ms, spread evenly over the duration and linearly interpolated.
    pitch_contour: tuple[float, ...] = Field(default=(8.0,), min_length=1)
    # (centre frequency Hz, bandwidth Hz) per second-order resonator, cascaded.
    resonator_poles: tuple[tuple[float, float], ...] = (
        (500.0, 60.0),
        (1500.0, 90.0),
        (2500.0, 120.0),
    )
    noise_floor: float = Field(default=0.0, ge=0)
    seed: int = 0

    @field_validator("pitch_contour")
    @classmethod
    def _pitch_in_range(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        for period in value:
            if not MIN_PITCH_PERIOD_MS <= period <= MAX_PITCH_PERIOD_MS:
                raise ValueError(
                    f"pitch period {period} ms outside [{MIN_PITCH_PERIOD_MS}, {MAX_PITCH_PERIOD_MS}] ms"
                )
        return value
