from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from app.core.errors import ConfigConflictError, DataError, NumericalError
from app.schemas.framing import FramingConfig
from app.schemas.model import TrainConfig
from app.services.framing_service import make_frames
from app.services.model_service import build_model
from app.services.training_service import train


@pytest.fixture
def toy_dataset(synthetic_utterance, framing_config):
    # The first 200 windows hold two GCIs (64 positive records).
    return make_frames(*synthetic_utterance, framing_config).subset(np.arange(200))


def test_loss_decreases(small_model_config, toy_dataset):
    model = build_model(small_model_config, seed=0)
    _, log = train(model, toy_dataset, TrainConfig(epochs=20, batch_size=32, seed=1))

    assert len(log.losses) == 20
    assert log.losses[-1] < log.losses[0]
    assert log.epochs[0].n_batches == 7
    assert log.epochs[0].n_positives == 64


def test_zero_learning_rate_changes_nothing(small_model_config, toy_dataset):
    model = build_model(small_model_config, seed=0)
    trained, _ = train(model, toy_dataset, TrainConfig(epochs=2, batch_size=64, learning_rate=0.0))

    for name, value in model.params.items():
        np.testing.assert_array_equal(trained.params[name], value)
    assert trained.optimizer.step == 8


def test_training_is_deterministic(small_model_config, toy_dataset):
    tc = TrainConfig(epochs=2, batch_size=50, seed=9)
    a, log_a = train(build_model(small_model_config, seed=2), toy_dataset, tc)
    b, log_b = train(build_model(small_model_config, seed=2), toy_dataset, tc)

    assert log_a.losses == log_b.losses
    for name in a.params:
        np.testing.assert_array_equal(a.params[name], b.params[name])


def test_zero_epochs_returns_the_model(small_model_config, toy_dataset):
    model = build_model(small_model_config, seed=0)
    trained, log = train(model, toy_dataset, TrainConfig(epochs=0))

    assert log.losses == []
    np.testing.assert_array_equal(trained.params["conv0.weight"], model.params["conv0.weight"])


def test_loss_log_frame(small_model_config, toy_dataset):
    _, log = train(build_model(small_model_config, seed=0), toy_dataset, TrainConfig(epochs=2, batch_size=100))
    frame = log.to_frame()

    assert list(frame["epoch"]) == [1, 2]
    assert list(frame.columns) == [
        "epoch",
        "mean_loss",
        "mean_classification",
        "mean_regression",
        "n_batches",
        "n_positives",
    ]


def test_empty_dataset(small_model_config, toy_dataset):
    empty = toy_dataset.subset(np.zeros(0, dtype=np.int64))
    with pytest.raises(DataError) as exc_info:
        train(build_model(small_model_config, seed=0), empty, TrainConfig(epochs=1))
    assert exc_info.value.code == "EMPTY_DATASET"


def test_framing_mismatch(small_model_config, synthetic_utterance):
    ds = make_frames(*synthetic_utterance, FramingConfig(context_ms=4.0))
    with pytest.raises(ConfigConflictError) as exc_info:
        train(build_model(small_model_config, seed=0), ds, TrainConfig(epochs=1))
    assert exc_info.value.code == "FRAMING_MISMATCH"


def test_non_finite_input_reports_the_batch(small_model_config, toy_dataset):
    signal = np.array(toy_dataset.signal)
    signal[100] = np.nan
    poisoned = replace(toy_dataset, signal=signal)

    with pytest.raises(NumericalError) as exc_info:
        train(build_model(small_model_config, seed=0), poisoned, TrainConfig(epochs=1, batch_size=50))
    assert exc_info.value.batch_index == 0
    assert exc_info.value.operator is not None
    assert exc_info.value.exit_code == 3
