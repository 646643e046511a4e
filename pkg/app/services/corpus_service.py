"""
Corpus manifests and the prepare stage: reference GCIs per utterance, noise
mixing per SNR, framing, and one dataset cache per (utterance, SNR).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app.core.errors import DataError, GciNetError, UsageError
from app.core.flow_logging import flow_info
from app.schemas.experiment import CorpusConfig, ManifestEntry, NoiseConfig, Snr, format_snr, parse_snr
from app.schemas.framing import FramingConfig
from app.schemas.signal import GciLabels, Waveform
from app.services.egg_service import extract_gci_from_degg
from app.services.framing_service import make_frames, save_dataset_cache
from app.services.noise_service import mix_noise, white_noise
from app.services.signal_io_service import read_labels, read_wav, write_labels

logger = logging.getLogger(__name__)

MANIFEST_COLUMNS = ["utterance_id", "speech", "egg", "labels", "speaker_id", "dataset_id"]
PREPARED_COLUMNS = ["utterance_id", "speaker_id", "dataset_id", "snr_db", "cache", "labels"]
WHITE_NOISE = "white"


def _cell(value) -> str:
    if value is None or (isinstance(value, float) and np.isnan(value)):
        return ""
    return str(value).strip()


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    """CSV manifest; relative file paths resolve against the manifest's directory."""
    target = Path(path)
    if not target.is_file():
        raise DataError(code="MANIFEST_NOT_FOUND", message=f"{target} does not exist.")
    table = pd.read_csv(target, dtype=str, keep_default_na=False)
    missing = {"utterance_id", "speech"} - set(table.columns)
    if missing:
        raise DataError(code="MANIFEST_INVALID", message=f"{target} lacks columns {sorted(missing)}.")

    base = target.parent
    entries: list[ManifestEntry] = []
    for row_no, row in enumerate(table.to_dict(orient="records"), start=2):
        fields = {key: _cell(row.get(key)) for key in MANIFEST_COLUMNS}
        for key in ("speech", "egg", "labels"):
            fields[key] = (base / fields[key]) if fields[key] else None
        try:
            entry = ManifestEntry.model_validate(fields)
        except ValidationError as exc:
            raise DataError(code="MANIFEST_INVALID", message=f"{target}:{row_no}: {exc.errors()[0]['msg']}") from exc
        for key in ("speech", "egg", "labels"):
            file_path = getattr(entry, key)
            if file_path is not None and not file_path.is_file():
                raise DataError(
                    code="MANIFEST_FILE_MISSING",
                    message=f"{target}:{row_no}: {key} file {file_path} does not exist.",
                )
        entries.append(entry)

    ids = [entry.utterance_id for entry in entries]
    if len(ids) != len(set(ids)):
        raise DataError(code="MANIFEST_INVALID", message=f"{target} repeats utterance ids.")
    return entries


def write_manifest(entries: Sequence[ManifestEntry], path: str | Path) -> None:
    target = Path(path)
    base = target.parent.resolve()

    def relative(file_path: Path | None) -> str:
        if file_path is None:
            return ""
        resolved = Path(file_path).resolve()
        return resolved.relative_to(base).as_posix() if resolved.is_relative_to(base) else str(resolved)

    rows = [
        {
            "utterance_id": e.utterance_id,
            "speech": relative(e.speech),
            "egg": relative(e.egg),
            "labels": relative(e.labels),
            "speaker_id": e.speaker_id,
            "dataset_id": e.dataset_id,
        }
        for e in entries
    ]
    pd.DataFrame(rows, columns=MANIFEST_COLUMNS).to_csv(target, index=False, lineterminator="\n")


def reference_labels(entry: ManifestEntry, corpus: CorpusConfig | None = None) -> GciLabels:
    """Label file if the manifest names one, otherwise negative dEGG peaks of the EGG."""
    if entry.labels is not None:
        return read_labels(entry.labels)
    corpus = corpus or CorpusConfig(manifest=Path("."))
    return extract_gci_from_degg(
        read_wav(entry.egg),
        min_period_ms=corpus.egg_min_period_ms,
        prominence_frac=corpus.egg_prominence,
        invert=corpus.invert_egg,
    )


def mixing_seed(seed: int, utterance_index: int, snr: Snr) -> int:
    snr_code = -1 if snr is None else int(round(snr * 100)) + 10_000
    return int(np.random.SeedSequence([seed, utterance_index, snr_code]).generate_state(1)[0])


class NoiseSource:
    """White noise generated per mix, or a recording read once and reused."""

    def __init__(self, source: str) -> None:
        self.source = source
        self._recording: Waveform | None = None
        if source != WHITE_NOISE:
            self._recording = read_wav(source)

    def corrupt(self, clean: Waveform, snr: Snr, seed: int) -> Waveform:
        if snr is None:
            return clean
        noise = self._recording
        if noise is None:
            noise = white_noise(len(clean), clean.sample_rate, seed)
        return mix_noise(clean, noise, snr, seed)


@dataclass(frozen=True)
class PreparedItem:
    utterance_id: str
    speaker_id: str
    dataset_id: str
    snr_db: Snr
    cache: Path
    labels: Path


def cache_name(utterance_id: str, snr: Snr) -> str:
    return f"{utterance_id}__{format_snr(snr)}.gcif"


def prepare_corpus(
    entries: Sequence[ManifestEntry],
    out_dir: str | Path,
    *,
    corpus: CorpusConfig | None = None,
    noise: NoiseConfig | None = None,
    framing: FramingConfig | None = None,
    seed: int = 7,
) -> list[PreparedItem]:
    """
    Writes `<utterance>__<snr>.gcif` caches plus the reference labels
    `<utterance>.ref.txt`. References come from the clean recording and are
    reused at every SNR. Existing caches are kept, so a rerun resumes.
    """
    noise = noise or NoiseConfig()
    framing = framing or FramingConfig()
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    source = NoiseSource(noise.source)

    items: list[PreparedItem] = []
    for index, entry in enumerate(entries):
        try:
            labels = reference_labels(entry, corpus)
            labels_path = target / f"{entry.utterance_id}.ref.txt"
            write_labels(labels, labels_path)
            clean: Waveform | None = None
            for snr in noise.snr_db:
                cache_path = target / cache_name(entry.utterance_id, snr)
                if not cache_path.exists():
                    if clean is None:
                        clean = read_wav(entry.speech)
                    speech = source.corrupt(clean, snr, mixing_seed(seed, index, snr))
                    save_dataset_cache(make_frames(speech, labels, framing), cache_path)
                items.append(
                    PreparedItem(
                        utterance_id=entry.utterance_id,
                        speaker_id=entry.speaker_id,
                        dataset_id=entry.dataset_id,
                        snr_db=snr,
                        cache=cache_path,
                        labels=labels_path,
                    )
                )
        except GciNetError as exc:
            raise type(exc)(code=exc.code, message=f"utterance {entry.utterance_id} ({entry.speech}): {exc.message}") from exc
        flow_info(
            logger,
            "prepare_utterance_done utterance_id=%s gcis=%d snrs=%s",
            entry.utterance_id,
            len(labels),
            ",".join(format_snr(s) for s in noise.snr_db),
            category="experiment",
        )
    write_prepared_index(items, target / "prepared.csv")
    return items


def write_prepared_index(items: Sequence[PreparedItem], path: str | Path) -> None:
    base = Path(path).parent
    rows = [
        {
            "utterance_id": item.utterance_id,
            "speaker_id": item.speaker_id,
            "dataset_id": item.dataset_id,
            "snr_db": format_snr(item.snr_db),
            "cache": item.cache.relative_to(base).as_posix(),
            "labels": item.labels.relative_to(base).as_posix(),
        }
        for item in items
    ]
    pd.DataFrame(rows, columns=PREPARED_COLUMNS).to_csv(path, index=False, lineterminator="\n")


def read_prepared_index(path: str | Path) -> list[PreparedItem]:
    target = Path(path)
    if target.is_dir():
        target = target / "prepared.csv"
    if not target.is_file():
        raise UsageError(code="NOT_PREPARED", message=f"{target} does not exist; run `prepare` first.")
    table = pd.read_csv(target, dtype=str, keep_default_na=False)
    base = target.parent
    return [
        PreparedItem(
            utterance_id=row["utterance_id"],
            speaker_id=row["speaker_id"],
            dataset_id=row["dataset_id"],
            snr_db=parse_snr(row["snr_db"]),
            cache=base / row["cache"],
            labels=base / row["labels"],
        )
        for row in table.to_dict(orient="records")
    ]
