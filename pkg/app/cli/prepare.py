from __future__ import annotations

import argparse
from pathlib import Path

from app.cli.common import add_config_arguments, load_config
from app.core.errors import EXIT_OK
from app.services.experiment_service import ExperimentRunner

FLAGS = {
    "manifest": "corpus.manifest",
    "invert_egg": "corpus.invert_egg",
    "noise": "noise.source",
    "snr": "noise.snr_db",
    "wd_ms": "framing.wd_ms",
    "context_ms": "framing.context_ms",
    "shift": "framing.shift_samples",
    "seed": "experiment.seed",
}


def run(args: argparse.Namespace) -> int:
    runner = ExperimentRunner(load_config(args, FLAGS))
    out_dir = args.output_dir or runner.prepared_dir
    items = runner.prepare(out_dir)
    print(f"prepared {len(items)} caches in {out_dir}")
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("prepare", help="Build dataset caches per utterance and SNR.")
    add_config_arguments(parser)
    parser.add_argument("--manifest", type=Path, default=None, help="Corpus manifest CSV.")
    parser.add_argument("--output-dir", type=Path, default=None, help="Default: <run dir>/prepared.")
    parser.add_argument("--noise", default=None, help="`white` or a noise WAV file.")
    parser.add_argument(
        "--snr",
        action="append",
        default=None,
        help="SNR in dB or `clean`; repeatable. Default: clean only.",
    )
    parser.add_argument("--wd-ms", type=float, default=None)
    parser.add_argument("--context-ms", type=float, default=None)
    parser.add_argument("--shift", type=int, default=None, help="Frame shift in samples.")
    parser.add_argument("--invert-egg", action="store_true", help="EGG polarity is inverted.")
    parser.add_argument("--seed", type=int, default=None)
    parser.set_defaults(handler=run)
