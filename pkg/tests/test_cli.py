from __future__ import annotations

import importlib.util
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from app.cli.main import main as gcinet
from app.cli.synth import parse_speaker
from app.core.config import settings
from app.core.errors import UsageError
from app.schemas.model import ModelConfig
from app.services.checkpoint_service import save_checkpoint
from app.services.model_service import build_model
from app.services.signal_io_service import read_labels


@pytest.fixture
def tiny_checkpoint(tmp_path):
    path = tmp_path / "tiny.gcic"
    save_checkpoint(build_model(ModelConfig(num_conv_layers=2, channels=2, head_hidden=4), seed=0), path)
    return path


@pytest.fixture
def corpus_dir(tmp_path):
    out = tmp_path / "corpus"
    assert gcinet(["synth", "--output-dir", str(out), "--count", "2", "--duration", "0.3", "--pitch-ms", "8"]) == 0
    return out


def test_no_command_is_a_usage_error(capsys):
    assert gcinet([]) == 1
    assert "BAD_ARGUMENTS" in capsys.readouterr().err


def test_unknown_flag_is_a_usage_error():
    assert gcinet(["eval", "--bogus"]) == 1


def test_synth_writes_exact_labels(corpus_dir):
    labels = read_labels(corpus_dir / "utt_000.txt")

    assert len(labels) == 38
    assert set(np.diff(labels.positions).tolist()) == {128}
    assert (corpus_dir / "manifest.csv").is_file()


def test_synth_is_deterministic(tmp_path):
    args = ["synth", "--count", "2", "--duration", "0.2", "--noise-floor", "0.01", "--seed", "4"]
    assert gcinet(args + ["--output-dir", str(tmp_path / "a")]) == 0
    assert gcinet(args + ["--output-dir", str(tmp_path / "b")]) == 0

    for name in ("utt_000.wav", "utt_001.wav", "utt_001.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_synth_speakers_round_robin(tmp_path):
    out = tmp_path / "spk"
    assert gcinet(["synth", "--output-dir", str(out), "--count", "3", "--duration", "0.1",
                   "--speaker", "low:10-16", "--speaker", "high:3-5"]) == 0

    manifest = pd.read_csv(out / "manifest.csv", dtype=str)
    assert list(manifest["speaker_id"]) == ["low", "high", "low"]


@pytest.mark.parametrize("text", ["nobody", "x:1-30", "x:8", ":4-8"])
def test_bad_speaker(text):
    with pytest.raises(UsageError):
        parse_speaker(text)


def test_synth_bad_pitch_range(tmp_path):
    assert gcinet(["synth", "--output-dir", str(tmp_path), "--pitch-range", "16-4"]) == 1


def test_eval_identical_files(corpus_dir, capsys):
    path = str(corpus_dir / "utt_000.txt")
    assert gcinet(["eval", "--ref", path, "--detected", path]) == 0

    out = capsys.readouterr().out
    assert "idr = 100.00" in out
    assert "far = 0.00" in out


def test_eval_directory_mode(tmp_path, corpus_dir):
    ref_dir = tmp_path / "ref"
    det_dir = tmp_path / "det"
    ref_dir.mkdir()
    det_dir.mkdir()
    for uid in ("utt_000", "utt_001"):
        text = (corpus_dir / f"{uid}.txt").read_text(encoding="utf-8")
        (ref_dir / f"{uid}.ref.txt").write_text(text, encoding="utf-8")
        (det_dir / f"{uid}.txt").write_text(text, encoding="utf-8")
    csv = tmp_path / "eval.csv"

    assert gcinet(["eval", "--ref", str(ref_dir), "--detected", str(det_dir), "--csv", str(csv)]) == 0

    table = pd.read_csv(csv)
    assert list(table["utterance_id"]) == ["utt_000", "utt_001", "__pooled__"]
    assert table["n_cycles"].iloc[-1] == table["n_cycles"].iloc[:-1].sum()
    assert (table["idr"] == 100.0).all()


def test_eval_unmatched_directories(tmp_path, corpus_dir, capsys):
    ref_dir = tmp_path / "ref"
    det_dir = tmp_path / "det"
    ref_dir.mkdir()
    det_dir.mkdir()
    (ref_dir / "a.txt").write_text("1\n100\n", encoding="utf-8")
    (det_dir / "b.txt").write_text("1\n100\n", encoding="utf-8")

    assert gcinet(["eval", "--ref", str(ref_dir), "--detected", str(det_dir)]) == 2
    assert "UNMATCHED_FILES" in capsys.readouterr().err


def test_detect_writes_labels_and_candidates(tmp_path, corpus_dir, tiny_checkpoint):
    out = tmp_path / "det.txt"
    cands = tmp_path / "cands.txt"
    code = gcinet([
        "detect",
        "--checkpoint", str(tiny_checkpoint),
        "--wav", str(corpus_dir / "utt_000.wav"),
        "--out", str(out),
        "--candidates", str(cands),
    ])

    assert code == 0
    labels = read_labels(out)
    assert len(cands.read_text(encoding="utf-8").splitlines()) >= len(labels)


def test_detect_missing_checkpoint(tmp_path, corpus_dir, capsys):
    code = gcinet([
        "detect",
        "--checkpoint", str(tmp_path / "absent.gcic"),
        "--wav", str(corpus_dir / "utt_000.wav"),
        "--out", str(tmp_path / "det.txt"),
    ])

    assert code == 2
    assert "FILE_NOT_FOUND" in capsys.readouterr().err


def test_detect_framing_conflict(tmp_path, corpus_dir, tiny_checkpoint, capsys):
    code = gcinet([
        "detect",
        "--checkpoint", str(tiny_checkpoint),
        "--wav", str(corpus_dir / "utt_000.wav"),
        "--out", str(tmp_path / "det.txt"),
        "--wd-ms", "1.0",
    ])

    assert code == 1
    assert "CHECKPOINT_CONFIG_CONFLICT" in capsys.readouterr().err
    assert not (tmp_path / "det.txt").exists()


def test_detect_bad_threshold(tmp_path, corpus_dir, tiny_checkpoint):
    code = gcinet([
        "detect",
        "--checkpoint", str(tiny_checkpoint),
        "--wav", str(corpus_dir / "utt_000.wav"),
        "--out", str(tmp_path / "det.txt"),
        "--threshold", "1.5",
    ])

    assert code == 1


def test_prepare_and_train(tmp_path, corpus_dir):
    prepared = tmp_path / "prepared"
    assert gcinet([
        "prepare",
        "--manifest", str(corpus_dir / "manifest.csv"),
        "--output-dir", str(prepared),
        "--snr", "clean",
        "--snr", "10",
    ]) == 0
    assert (prepared / "utt_001__10.gcif").is_file()

    trained = tmp_path / "train"
    assert gcinet([
        "train",
        "--prepared", str(prepared),
        "--output-dir", str(trained),
        "--set", "noise.snr_db=clean,10",
        "--snr", "10",
        "--epochs", "1",
        "--train-fraction", "0.5",
        "--set", "model.num_conv_layers=2",
        "--set", "model.channels=2",
        "--set", "model.head_hidden=4",
    ]) == 0
    for name in ("model.gcic", "loss.csv", "split.csv", "resolved.ini"):
        assert (trained / name).is_file()
    split = pd.read_csv(trained / "split.csv")
    assert sorted(split["role"]) == ["test", "train"]


def test_train_without_prepare(tmp_path):
    assert gcinet(["train", "--prepared", str(tmp_path / "nothing")]) == 1


def test_experiment_needs_config():
    assert gcinet(["experiment"]) == 1


def test_desk_acceptance_output_follows_the_output_root(tmp_path, monkeypatch):
    script = Path(__file__).resolve().parents[1] / "scripts" / "run_desk_acceptance.py"
    spec = importlib.util.spec_from_file_location("run_desk_acceptance", script)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)

    monkeypatch.setattr(settings, "GCINET_OUTPUT_ROOT", str(tmp_path / "elsewhere"))

    assert module.default_output_dir() == tmp_path / "elsewhere" / "desk_acceptance"
