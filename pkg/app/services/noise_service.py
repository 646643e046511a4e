from __future__ import annotations

import numpy as np

from app.core.errors import DataError
from app.schemas.signal import Waveform


def _power(samples: np.ndarray) -> float:
    return float(np.mean(np.square(samples)))


def white_noise(length: int, sample_rate: int, seed: int) -> Waveform:
    if length <= 0:
        raise DataError(code="SIGNAL_TOO_SHORT", message="Noise length must be positive.")
    rng = np.random.default_rng(seed)
    return Waveform(samples=rng.standard_normal(length), sample_rate=sample_rate)


def noise_segment(noise: Waveform, length: int, seed: int) -> np.ndarray:
    """`length` samples of noise starting at a seeded circular offset, tiling if needed."""
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(0, len(noise)))
    indices = (offset + np.arange(length)) % len(noise)
    return noise.samples[indices]


def scale_noise(clean: Waveform, noise: Waveform, snr_db: float, seed: int) -> Waveform:
    """The noise component that `mix_noise` adds to `clean`."""
    if clean.sample_rate != noise.sample_rate:
        raise DataError(
            code="SAMPLE_RATE_MISMATCH",
            message=f"clean is {clean.sample_rate} Hz but noise is {noise.sample_rate} Hz.",
        )
    if len(clean) == 0 or len(noise) == 0:
        raise DataError(code="SIGNAL_TOO_SHORT", message="Cannot mix empty signals.")
    clean_power = _power(clean.samples)
    if clean_power <= 0.0:
        raise DataError(code="ZERO_POWER", message="Clean signal has zero power; SNR is undefined.")
    segment = noise_segment(noise, len(clean), seed)
    noise_power = _power(segment)
    if noise_power <= 0.0:
        raise DataError(code="ZERO_POWER", message="Noise segment has zero power.")
    gain = np.sqrt(clean_power / (noise_power * 10.0 ** (snr_db / 10.0)))
    return Waveform(samples=gain * segment, sample_rate=clean.sample_rate)


def mix_noise(clean: Waveform, noise: Waveform, snr_db: float, seed: int) -> Waveform:
    scaled = scale_noise(clean, noise, snr_db, seed)
    return Waveform(samples=clean.samples + scaled.samples, sample_rate=clean.sample_rate)


def measure_snr(clean: Waveform, noisy: Waveform) -> float:
    residual = noisy.samples - clean.samples
    return 10.0 * np.log10(_power(clean.samples) / _power(residual))
