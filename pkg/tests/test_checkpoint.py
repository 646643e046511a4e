from __future__ import annotations

import numpy as np
import pytest

from app.core.binary_container import Container, write_container
from app.core.errors import ConfigConflictError, FormatError
from app.schemas.model import TrainConfig
from app.services.checkpoint_service import CHECKPOINT_MAGIC, load_checkpoint, save_checkpoint
from app.services.framing_service import make_frames, save_dataset_cache
from app.services.model_service import build_model, forward
from app.services.training_service import train


@pytest.fixture
def trained_model(small_model_config, synthetic_utterance, framing_config):
    ds = make_frames(*synthetic_utterance, framing_config).subset(np.arange(100))
    model, _ = train(build_model(small_model_config, seed=0), ds, TrainConfig(epochs=1, batch_size=50))
    return model


def test_round_trip_is_bit_identical(tmp_path, trained_model, rng):
    path = tmp_path / "model.gcic"
    save_checkpoint(trained_model, path)
    restored = load_checkpoint(path)

    assert restored.config == trained_model.config
    assert list(restored.params) == list(trained_model.params)
    for name, value in trained_model.params.items():
        np.testing.assert_array_equal(restored.params[name], value)
        np.testing.assert_array_equal(restored.optimizer.m[name], trained_model.optimizer.m[name])
        np.testing.assert_array_equal(restored.optimizer.u[name], trained_model.optimizer.u[name])
    assert restored.optimizer.step == trained_model.optimizer.step == 2

    frames = rng.standard_normal((8, 192))
    for a, b in zip(forward(trained_model, frames), forward(restored, frames)):
        np.testing.assert_array_equal(a, b)


def test_training_resumes_from_checkpoint(tmp_path, trained_model, synthetic_utterance, framing_config):
    path = tmp_path / "model.gcic"
    save_checkpoint(trained_model, path)
    ds = make_frames(*synthetic_utterance, framing_config).subset(np.arange(100))

    resumed, _ = train(load_checkpoint(path), ds, TrainConfig(epochs=1, batch_size=50))

    assert resumed.optimizer.step == 4


def test_truncated_checkpoint(tmp_path, trained_model):
    path = tmp_path / "model.gcic"
    save_checkpoint(trained_model, path)
    path.write_bytes(path.read_bytes()[:-1])

    with pytest.raises(FormatError) as exc_info:
        load_checkpoint(path)
    assert exc_info.value.code == "CHECKSUM_MISMATCH"


def test_flipped_byte(tmp_path, trained_model):
    path = tmp_path / "model.gcic"
    save_checkpoint(trained_model, path)
    blob = bytearray(path.read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    path.write_bytes(bytes(blob))

    with pytest.raises(FormatError) as exc_info:
        load_checkpoint(path)
    assert exc_info.value.code == "CHECKSUM_MISMATCH"


def test_dataset_cache_is_not_a_checkpoint(tmp_path, synthetic_utterance, framing_config):
    path = tmp_path / "utt.gcif"
    save_dataset_cache(make_frames(*synthetic_utterance, framing_config), path)

    with pytest.raises(FormatError) as exc_info:
        load_checkpoint(path)
    assert exc_info.value.code == "BAD_MAGIC"


def test_missing_array(tmp_path, trained_model):
    path = tmp_path / "partial.gcic"
    meta = {
        "model_config": trained_model.config.model_dump(mode="json"),
        "param_names": ["conv0.weight"],
        "optimizer": {"lr": 0.002, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "step": 0},
    }
    write_container(path, CHECKPOINT_MAGIC, 1, Container(meta=meta, arrays={}))

    with pytest.raises(FormatError) as exc_info:
        load_checkpoint(path)
    assert exc_info.value.code == "MISSING_ARRAY"


def test_missing_file(tmp_path):
    with pytest.raises(FormatError) as exc_info:
        load_checkpoint(tmp_path / "absent.gcic")
    assert exc_info.value.code == "FILE_NOT_FOUND"


def test_conflicting_framing(tmp_path, trained_model):
    path = tmp_path / "model.gcic"
    save_checkpoint(trained_model, path)

    assert load_checkpoint(path, expected_wd_samples=32, expected_wi_samples=192).config.wd_samples == 32
    with pytest.raises(ConfigConflictError) as exc_info:
        load_checkpoint(path, expected_wd_samples=16)
    assert exc_info.value.code == "CHECKPOINT_CONFIG_CONFLICT"
    assert exc_info.value.exit_code == 1
