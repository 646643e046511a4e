"""Impulse-train source / cascade-resonator filter synthesis with known epochs."""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from app.core.errors import DataError
from app.schemas.signal import (
    DEFAULT_SAMPLE_RATE,
    MAX_PITCH_PERIOD_MS,
    MIN_PITCH_PERIOD_MS,
    GciLabels,
    SynthSpec,
    Waveform,
)


def resonator_coefficients(frequency: float, bandwidth: float, sample_rate: int) -> tuple[np.ndarray, np.ndarray]:
    """Second-order resonator with unity gain at DC: y[n] = A x[n] + B y[n-1] + C y[n-2]."""
    if bandwidth <= 0 or not 0 < frequency < sample_rate / 2:
        raise DataError(
            code="UNSTABLE_RESONATOR",
            message=f"Resonator ({frequency} Hz, {bandwidth} Hz) is unstable or above Nyquist at {sample_rate} Hz.",
        )
    radius = np.exp(-np.pi * bandwidth / sample_rate)
    theta = 2.0 * np.pi * frequency / sample_rate
    c = -radius * radius
    b = 2.0 * radius * np.cos(theta)
    a = 1.0 - b - c
    return np.array([a]), np.array([1.0, -b, -c])


def epoch_positions(spec: SynthSpec, sample_rate: int) -> np.ndarray:
    n_samples = int(round(spec.duration * sample_rate))
    contour = np.asarray(spec.pitch_contour, dtype=np.float64)
    if np.any(contour < MIN_PITCH_PERIOD_MS) or np.any(contour > MAX_PITCH_PERIOD_MS):
        raise DataError(
            code="PITCH_OUT_OF_RANGE",
            message=f"Pitch periods must lie in [{MIN_PITCH_PERIOD_MS}, {MAX_PITCH_PERIOD_MS}] ms.",
        )
    anchors = np.linspace(0.0, spec.duration, len(contour))

    positions: list[int] = []
    # Accumulate in samples so constant contours land on exact multiples.
    cursor = 0.0
    while True:
        index = int(round(cursor))
        if index >= n_samples:
            break
        positions.append(index)
        period_ms = float(np.interp(cursor / sample_rate, anchors, contour)) if len(contour) > 1 else float(contour[0])
        cursor += period_ms * sample_rate / 1000.0
    return np.asarray(positions, dtype=np.int64)


def synth_voiced(spec: SynthSpec, sample_rate: int = DEFAULT_SAMPLE_RATE) -> tuple[Waveform, GciLabels]:
    filters = [resonator_coefficients(f, bw, sample_rate) for f, bw in spec.resonator_poles]
    positions = epoch_positions(spec, sample_rate)
    n_samples = int(round(spec.duration * sample_rate))

    signal = np.zeros(n_samples, dtype=np.float64)
    signal[positions] = 1.0
    for numerator, denominator in filters:
        signal = lfilter(numerator, denominator, signal)
    if spec.noise_floor > 0:
        rng = np.random.default_rng(spec.seed)
        signal = signal + spec.noise_floor * rng.standard_normal(n_samples)
    return Waveform(samples=signal, sample_rate=sample_rate), GciLabels(positions)
