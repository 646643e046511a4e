from __future__ import annotations

import argparse
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from app.cli.common import output_root
from app.core.config import settings
from app.core.errors import EXIT_OK, UsageError
from app.schemas.experiment import ManifestEntry
from app.schemas.signal import DEFAULT_SAMPLE_RATE, MAX_PITCH_PERIOD_MS, MIN_PITCH_PERIOD_MS, SynthSpec, Waveform
from app.services.corpus_service import write_manifest
from app.services.egg_service import synth_egg
from app.services.signal_io_service import write_labels, write_wav
from app.services.synth_service import synth_voiced

logger = logging.getLogger(__name__)

DEFAULT_PITCH_RANGE = "4-16"
PEAK_LEVEL = 0.9


@dataclass(frozen=True)
class SyntheticSpeaker:
    speaker_id: str
    min_period_ms: float
    max_period_ms: float


def _period_range(text: str) -> tuple[float, float]:
    low, sep, high = text.partition("-")
    try:
        lo, hi = float(low), float(high)
    except ValueError as exc:
        raise UsageError(code="BAD_PITCH_RANGE", message=f"{text!r} is not MIN-MAX in ms.") from exc
    if not sep or not MIN_PITCH_PERIOD_MS <= lo <= hi <= MAX_PITCH_PERIOD_MS:
        raise UsageError(
            code="BAD_PITCH_RANGE",
            message=f"{text!r} must satisfy {MIN_PITCH_PERIOD_MS} <= MIN <= MAX <= {MAX_PITCH_PERIOD_MS} ms.",
        )
    return lo, hi


def parse_speaker(text: str) -> SyntheticSpeaker:
    speaker_id, sep, period_range = text.partition(":")
    if not sep or not speaker_id:
        raise UsageError(code="BAD_SPEAKER", message=f"Speaker {text!r} is not ID:MIN-MAX.")
    lo, hi = _period_range(period_range)
    return SyntheticSpeaker(speaker_id=speaker_id, min_period_ms=lo, max_period_ms=hi)


def utterance_spec(args: argparse.Namespace, index: int, speaker: SyntheticSpeaker | None) -> SynthSpec:
    seed = int(np.random.SeedSequence([args.seed, index]).generate_state(1)[0])
    if args.pitch_ms is not None and speaker is None:
        contour: tuple[float, ...] = (args.pitch_ms,)
    else:
        lo, hi = (speaker.min_period_ms, speaker.max_period_ms) if speaker else _period_range(args.pitch_range)
        rng = np.random.default_rng(seed)
        contour = tuple(float(v) for v in rng.uniform(lo, hi, size=args.anchors))
    return SynthSpec(duration=args.duration, pitch_contour=contour, noise_floor=args.noise_floor, seed=seed)


def _normalized(w: Waveform) -> Waveform:
    peak = float(np.max(np.abs(w.samples))) if len(w) else 0.0
    if peak == 0.0:
        return w
    return Waveform(samples=w.samples * (PEAK_LEVEL / peak), sample_rate=w.sample_rate)


def run(args: argparse.Namespace) -> int:
    out_dir = args.output_dir or output_root() / "synth"
    out_dir.mkdir(parents=True, exist_ok=True)
    speakers = [parse_speaker(text) for text in args.speaker]
    if args.count < 1:
        raise UsageError(code="BAD_COUNT", message="--count must be >= 1.")

    entries: list[ManifestEntry] = []
    for index in range(args.count):
        speaker = speakers[index % len(speakers)] if speakers else None
        utterance_id = f"utt_{index:03d}"
        spec = utterance_spec(args, index, speaker)
        speech, labels = synth_voiced(spec, args.sample_rate)
        speech_path = out_dir / f"{utterance_id}.wav"
        labels_path = out_dir / f"{utterance_id}.txt"
        write_wav(_normalized(speech), speech_path)
        write_labels(labels, labels_path)
        egg_path = None
        if args.write_egg:
            egg_path = out_dir / f"{utterance_id}_egg.wav"
            write_wav(synth_egg(labels, len(speech), args.sample_rate), egg_path)
        entries.append(
            ManifestEntry(
                utterance_id=utterance_id,
                speech=speech_path,
                egg=egg_path,
                labels=labels_path,
                speaker_id=speaker.speaker_id if speaker else "synthetic",
                dataset_id=args.dataset_id,
            )
        )
        logger.debug("synth_utterance utterance_id=%s gcis=%d contour=%s", utterance_id, len(labels), spec.pitch_contour)

    manifest_path = out_dir / "manifest.csv"
    write_manifest(entries, manifest_path)
    print(f"wrote {len(entries)} utterances and {manifest_path}")
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("synth", help="Synthesize voiced speech with known GCIs.")
    parser.add_argument("--output-dir", type=Path, default=None, help="Default: <GCINET_OUTPUT_ROOT>/synth.")
    parser.add_argument("--count", type=int, default=10)
    parser.add_argument("--duration", type=float, default=1.0, help="Seconds per utterance.")
    parser.add_argument("--pitch-ms", type=float, default=None, help="Constant pitch period in ms.")
    parser.add_argument("--pitch-range", default=DEFAULT_PITCH_RANGE, help="MIN-MAX ms for random pitch contours.")
    parser.add_argument("--anchors", type=int, default=4, help="Contour anchor points per utterance.")
    parser.add_argument(
        "--speaker",
        action="append",
        default=[],
        metavar="ID:MIN-MAX",
        help="Synthetic speaker with its own pitch range; utterances are assigned round-robin.",
    )
    parser.add_argument("--noise-floor", type=float, default=0.0)
    parser.add_argument("--sample-rate", type=int, default=DEFAULT_SAMPLE_RATE)
    parser.add_argument("--dataset-id", default="synthetic")
    parser.add_argument("--write-egg", action="store_true", help="Also write a synthetic EGG per utterance.")
    parser.add_argument("--seed", type=int, default=settings.GCINET_DEFAULT_SEED)
    parser.set_defaults(handler=run)
