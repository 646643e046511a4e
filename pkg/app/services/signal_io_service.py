from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import soundfile as sf

from app.core.errors import DataError
from app.schemas.signal import GciLabels, Waveform

logger = logging.getLogger(__name__)

_SUPPORTED_FORMATS = {"WAV", "WAVEX"}
_SUPPORTED_SUBTYPES = {"PCM_16", "FLOAT"}
_PCM16_SCALE = 32768.0


def read_wav(path: str | Path) -> Waveform:
    target = Path(path)
    if not target.is_file():
        raise DataError(code="WAV_NOT_FOUND", message=f"{target} does not exist.")
    try:
        info = sf.info(str(target))
    except RuntimeError as exc:
        raise DataError(code="WAV_UNREADABLE", message=f"{target}: {exc}") from exc
    if info.format not in _SUPPORTED_FORMATS:
        raise DataError(
            code="WAV_UNSUPPORTED_ENCODING",
            message=f"{target} is {info.format}, only RIFF/WAVE is supported.",
        )
    if info.channels != 1:
        raise DataError(
            code="WAV_NOT_MONO",
            message=f"{target} has {info.channels} channels, expected 1.",
        )
    if info.subtype not in _SUPPORTED_SUBTYPES:
        raise DataError(
            code="WAV_UNSUPPORTED_ENCODING",
            message=f"{target} uses {info.subtype}, expected 16-bit PCM or 32-bit float.",
        )
    samples, sample_rate = sf.read(str(target), dtype="float64", always_2d=False)
    return Waveform(samples=samples, sample_rate=int(sample_rate))


def write_wav(w: Waveform, path: str | Path, *, subtype: str = "PCM_16") -> None:
    target = Path(path)
    if subtype not in _SUPPORTED_SUBTYPES:
        raise DataError(code="WAV_UNSUPPORTED_ENCODING", message=f"Cannot write subtype {subtype}.")
    if not target.parent.is_dir():
        raise DataError(code="PATH_NOT_WRITABLE", message=f"Directory {target.parent} does not exist.")

    samples = w.samples
    peak = float(np.max(np.abs(samples))) if len(w) else 0.0
    if peak > 1.0:
        logger.warning("wav_write_clipped path=%s peak=%.6f", target, peak)
        samples = np.clip(samples, -1.0, 1.0)

    if subtype == "PCM_16":
        # Round to nearest code so a read back stays within 2**-15 of the input.
        codes = np.floor(samples * _PCM16_SCALE + 0.5)
        saturated = int(np.count_nonzero(codes > 32767))
        if saturated:
            # +1.0 has no int16 code; it lands on 32767.
            logger.debug("wav_write_pcm_saturated path=%s count=%d", target, saturated)
        data = np.clip(codes, -32768, 32767).astype(np.int16)
    else:
        data = samples.astype(np.float32)
    try:
        sf.write(str(target), data, w.sample_rate, subtype=subtype, format="WAV")
    except (OSError, RuntimeError) as exc:
        raise DataError(code="PATH_NOT_WRITABLE", message=f"{target}: {exc}") from exc


def read_labels(path: str | Path) -> GciLabels:
    target = Path(path)
    if not target.is_file():
        raise DataError(code="LABELS_NOT_FOUND", message=f"{target} does not exist.")
    values: list[int] = []
    for line_no, raw_line in enumerate(target.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw_line.strip()
        if not line:
            continue
        try:
            values.append(int(line))
        except ValueError as exc:
            raise DataError(
                code="LABELS_NOT_INTEGER",
                message=f"{target}:{line_no}: {line!r} is not an integer sample index.",
            ) from exc
    try:
        return GciLabels(np.asarray(values, dtype=np.int64))
    except DataError as exc:
        raise DataError(code=exc.code, message=f"{target}: {exc.message}") from exc


def write_labels(labels: GciLabels, path: str | Path) -> None:
    target = Path(path)
    if not target.parent.is_dir():
        raise DataError(code="PATH_NOT_WRITABLE", message=f"Directory {target.parent} does not exist.")
    body = "".join(f"{value}\n" for value in labels)
    target.write_text(body, encoding="utf-8", newline="\n")
