from __future__ import annotations

import numpy as np
import pytest

from app.cli.main import main as gcinet
from app.core.errors import DataError, UsageError
from app.schemas.experiment import ManifestEntry, NoiseConfig
from app.schemas.signal import Waveform
from app.services.corpus_service import (
    cache_name,
    load_manifest,
    mixing_seed,
    prepare_corpus,
    read_prepared_index,
    reference_labels,
    write_manifest,
)
from app.services.framing_service import load_dataset_cache
from app.services.noise_service import measure_snr
from app.services.signal_io_service import read_labels, read_wav

PREPARE_SNRS = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0)


@pytest.fixture
def corpus_dir(tmp_path):
    out = tmp_path / "corpus"
    code = gcinet(["synth", "--output-dir", str(out), "--count", "3", "--duration", "0.2", "--write-egg", "--seed", "5"])
    assert code == 0
    return out


def test_synth_manifest_loads(corpus_dir):
    entries = load_manifest(corpus_dir / "manifest.csv")

    assert [e.utterance_id for e in entries] == ["utt_000", "utt_001", "utt_002"]
    assert entries[0].speech == corpus_dir / "utt_000.wav"
    assert entries[0].egg == corpus_dir / "utt_000_egg.wav"
    assert entries[0].speaker_id == "synthetic"


def test_manifest_round_trip(tmp_path, corpus_dir):
    entries = load_manifest(corpus_dir / "manifest.csv")
    path = corpus_dir / "copy.csv"

    write_manifest(entries, path)

    assert load_manifest(path) == entries
    assert "utt_000.wav" in path.read_text(encoding="utf-8")


def test_manifest_with_missing_file(corpus_dir):
    path = corpus_dir / "broken.csv"
    path.write_text("utterance_id,speech,labels\nx,absent.wav,utt_000.txt\n", encoding="utf-8")

    with pytest.raises(DataError) as exc_info:
        load_manifest(path)
    assert exc_info.value.code == "MANIFEST_FILE_MISSING"


def test_manifest_without_a_reference(corpus_dir):
    path = corpus_dir / "noref.csv"
    path.write_text("utterance_id,speech\nx,utt_000.wav\n", encoding="utf-8")

    with pytest.raises(DataError) as exc_info:
        load_manifest(path)
    assert exc_info.value.code == "MANIFEST_INVALID"


def test_manifest_repeating_ids(corpus_dir):
    path = corpus_dir / "dupes.csv"
    path.write_text("utterance_id,speech,labels\nx,utt_000.wav,utt_000.txt\nx,utt_001.wav,utt_001.txt\n", encoding="utf-8")

    with pytest.raises(DataError) as exc_info:
        load_manifest(path)
    assert exc_info.value.code == "MANIFEST_INVALID"


def test_missing_manifest(tmp_path):
    with pytest.raises(DataError) as exc_info:
        load_manifest(tmp_path / "manifest.csv")
    assert exc_info.value.code == "MANIFEST_NOT_FOUND"


def test_egg_references_match_label_files(corpus_dir):
    entry = ManifestEntry(utterance_id="u", speech=corpus_dir / "utt_001.wav", egg=corpus_dir / "utt_001_egg.wav")
    truth = read_labels(corpus_dir / "utt_001.txt").tolist()

    # A closure on the very first sample leaves no dEGG drop to find.
    assert reference_labels(entry).tolist() == [p for p in truth if p > 0]


def test_prepare_writes_every_snr(tmp_path, corpus_dir):
    entries = load_manifest(corpus_dir / "manifest.csv")
    out = tmp_path / "prepared"
    items = prepare_corpus(entries, out, noise=NoiseConfig(snr_db=(None,) + PREPARE_SNRS), seed=3)

    assert len(items) == 3 * 7
    for entry in entries:
        assert (out / f"{entry.utterance_id}.ref.txt").is_file()
        for snr in (None,) + PREPARE_SNRS:
            assert (out / cache_name(entry.utterance_id, snr)).is_file()
    assert read_prepared_index(out) == items


def test_prepared_caches_hit_their_snr(tmp_path, corpus_dir):
    entries = load_manifest(corpus_dir / "manifest.csv")
    prepare_corpus(entries[:1], tmp_path, noise=NoiseConfig(snr_db=(None,) + PREPARE_SNRS), seed=3)
    clean = load_dataset_cache(tmp_path / cache_name("utt_000", None))

    np.testing.assert_allclose(clean.signal, read_wav(entries[0].speech).samples)
    for snr in PREPARE_SNRS:
        noisy = load_dataset_cache(tmp_path / cache_name("utt_000", snr))
        measured = measure_snr(
            Waveform(samples=clean.signal, sample_rate=16000), Waveform(samples=noisy.signal, sample_rate=16000)
        )
        assert abs(measured - snr) < 0.01
        # Noise never moves the labels.
        np.testing.assert_array_equal(noisy.t_c, clean.t_c)


def test_prepare_is_deterministic_and_resumable(tmp_path, corpus_dir):
    entries = load_manifest(corpus_dir / "manifest.csv")
    noise = NoiseConfig(snr_db=(None, 10.0))
    prepare_corpus(entries, tmp_path / "a", noise=noise, seed=3)
    prepare_corpus(entries, tmp_path / "b", noise=noise, seed=3)

    for name in ("utt_002__10.gcif", "utt_002__clean.gcif"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    cache = tmp_path / "a" / "utt_002__10.gcif"
    before = cache.stat().st_mtime_ns
    prepare_corpus(entries, tmp_path / "a", noise=noise, seed=3)
    assert cache.stat().st_mtime_ns == before


def test_mixing_seeds_differ_per_utterance_and_snr():
    seeds = {mixing_seed(7, index, snr) for index in range(5) for snr in (None, 0.0, 0.5, 10.0)}
    assert len(seeds) == 20


def test_prepared_index_missing(tmp_path):
    with pytest.raises(UsageError) as exc_info:
        read_prepared_index(tmp_path)
    assert exc_info.value.code == "NOT_PREPARED"
