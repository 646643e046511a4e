"""Ground-truth GCIs from electroglottograph (EGG) recordings."""

from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks

from app.core.errors import DataError
from app.schemas.signal import GciLabels, Waveform, ms_to_samples

DEFAULT_PROMINENCE_FRAC = 0.3


def differentiate(w: Waveform) -> Waveform:
    if len(w) < 2:
        raise DataError(code="SIGNAL_TOO_SHORT", message="Differentiation needs at least 2 samples.")
    return Waveform(samples=np.diff(w.samples, prepend=w.samples[0]), sample_rate=w.sample_rate)


def extract_gci_from_degg(
    egg: Waveform,
    min_period_ms: float = 2.0,
    prominence_frac: float = DEFAULT_PROMINENCE_FRAC,
    *,
    invert: bool = False,
) -> GciLabels:
    """
    GCIs are the negative dEGG peaks deeper than `prominence_frac` of the
    deepest one in the utterance. Peaks closer than `min_period_ms` are thinned
    greedily, deepest first.
    """
    if len(egg) < 3:
        raise DataError(code="SIGNAL_TOO_SHORT", message="EGG needs at least 3 samples for peak picking.")
    if not 0.0 < prominence_frac <= 1.0:
        raise DataError(code="BAD_PROMINENCE", message=f"prominence_frac must be in (0, 1], got {prominence_frac}.")

    depth = -differentiate(egg).samples
    if invert:
        depth = -depth
    deepest = float(np.max(depth))
    if deepest <= 0.0:
        return GciLabels(np.zeros(0, dtype=np.int64))

    min_distance = max(1, ms_to_samples(min_period_ms, egg.sample_rate))
    peaks, _ = find_peaks(depth, height=prominence_frac * deepest, distance=min_distance)
    return GciLabels(peaks.astype(np.int64))


def synth_egg(
    labels: GciLabels,
    length: int,
    sample_rate: int,
    *,
    open_quotient: float = 0.6,
) -> Waveform:
    """
    Sawtooth EGG: contact ramps up over the open phase of each cycle and falls
    abruptly on the GCI sample, so the dEGG minimum sits exactly on each label.
    """
    if not 0.0 < open_quotient < 1.0:
        raise DataError(code="BAD_OPEN_QUOTIENT", message="open_quotient must be in (0, 1).")
    labels.check_against(length)
    egg = np.zeros(length, dtype=np.float64)
    positions = labels.positions
    default_period = ms_to_samples(8.0, sample_rate)
    for index, gci in enumerate(positions):
        if index > 0:
            period = int(gci - positions[index - 1])
        elif len(positions) > 1:
            period = int(positions[1] - gci)
        else:
            period = default_period
        ramp = min(int(gci), max(2, int(round(period * open_quotient))))
        if ramp:
            egg[gci - ramp : gci] = np.linspace(0.0, 0.5, ramp + 1)[1:]
    return Waveform(samples=egg, sample_rate=sample_rate)
