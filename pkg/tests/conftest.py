from __future__ import annotations

import os
import sys

import numpy as np
import pytest

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from app.schemas.framing import FramingConfig
from app.schemas.model import ModelConfig
from app.schemas.signal import GciLabels, SynthSpec, Waveform
from app.services.synth_service import synth_voiced


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def framing_config():
    return FramingConfig()


@pytest.fixture
def small_model_config():
    # Default 2 ms / 5 ms framing at 16 kHz, but few and narrow layers.
    return ModelConfig(num_conv_layers=2, kernel_size=5, channels=4, head_hidden=8)


@pytest.fixture
def synthetic_utterance() -> tuple[Waveform, GciLabels]:
    spec = SynthSpec(duration=0.25, pitch_contour=(8.0,), seed=3)
    return synth_voiced(spec, 16000)
