from __future__ import annotations

import argparse
from pathlib import Path

from app.core.errors import EXIT_OK, DataError
from app.schemas.evaluation import EvalReport
from app.schemas.signal import DEFAULT_SAMPLE_RATE
from app.services.evaluation_service import aggregate, evaluate, write_reports_csv
from app.services.signal_io_service import read_labels

LABEL_SUFFIXES = (".ref.txt", ".txt")


def _utterance_id(path: Path) -> str:
    for suffix in LABEL_SUFFIXES:
        if path.name.endswith(suffix):
            return path.name[: -len(suffix)]
    return path.stem


def _label_files(directory: Path) -> dict[str, Path]:
    return {_utterance_id(path): path for path in sorted(directory.glob("*.txt"))}


def pair_label_files(reference: Path, detected: Path) -> list[tuple[str, Path, Path]]:
    """(utterance_id, reference, detected) for two files, or two directories matched by utterance id."""
    if reference.is_file() and detected.is_file():
        return [(_utterance_id(detected), reference, detected)]
    if not (reference.is_dir() and detected.is_dir()):
        raise DataError(
            code="UNMATCHED_FILES",
            message=f"--ref and --detected must both be files or both be directories ({reference}, {detected}).",
        )
    references, detections = _label_files(reference), _label_files(detected)
    unmatched = sorted(set(references) ^ set(detections))
    if unmatched:
        raise DataError(code="UNMATCHED_FILES", message=f"No counterpart for: {', '.join(unmatched)}.")
    if not references:
        raise DataError(code="UNMATCHED_FILES", message=f"No label files in {reference}.")
    return [(uid, references[uid], detections[uid]) for uid in sorted(references)]


def run(args: argparse.Namespace) -> int:
    rows: list[tuple[str, EvalReport]] = []
    for utterance_id, ref_path, det_path in pair_label_files(args.ref, args.detected):
        rows.append((utterance_id, evaluate(read_labels(ref_path), read_labels(det_path), args.sample_rate)))
    if args.csv is not None:
        write_reports_csv(rows, args.csv, pooled=len(rows) > 1)
    print(aggregate([report for _, report in rows]).to_text(), end="")
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="Score detected GCIs against references.")
    parser.add_argument("--ref", type=Path, required=True, help="Reference label file or directory.")
    parser.add_argument("--detected", type=Path, required=True, help="Detected label file or directory.")
    parser.add_argument("--sample-rate", type=int, default=DEFAULT_SAMPLE_RATE)
    parser.add_argument("--csv", type=Path, default=None, help="Per-utterance rows plus a pooled row.")
    parser.set_defaults(handler=run)
