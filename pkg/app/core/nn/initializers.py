from __future__ import annotations

import numpy as np


def selu_init(shape: tuple[int, ...], fan_in: int, seed: int | np.random.Generator) -> np.ndarray:
    """LeCun-normal weights (mean 0, variance 1/fan_in), the self-normalizing scheme for SELU."""
    if fan_in <= 0:
        raise ValueError(f"fan_in must be positive, got {fan_in}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.normal(0.0, np.sqrt(1.0 / fan_in), size=shape)


def zeros_init(shape: tuple[int, ...]) -> np.ndarray:
    return np.zeros(shape, dtype=np.float64)
