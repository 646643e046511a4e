from __future__ import annotations

import argparse
from pathlib import Path

from app.cli.common import add_config_arguments, load_config
from app.core.errors import EXIT_OK
from app.schemas.experiment import format_snr, parse_snr
from app.services.corpus_service import read_prepared_index
from app.services.experiment_config_service import write_resolved_config
from app.services.experiment_service import default_run_dir, train_on_prepared

FLAGS = {
    "epochs": "train.epochs",
    "batch_size": "train.batch_size",
    "learning_rate": "train.learning_rate",
    "train_seed": "train.seed",
    "w_c": "train.w_c",
    "w_r": "train.w_r",
    "split_mode": "split.mode",
    "train_fraction": "split.train_fraction",
    "train_groups": "split.train_groups",
    "seed": "experiment.seed",
}


def run(args: argparse.Namespace) -> int:
    config = load_config(args, FLAGS)
    run_dir = default_run_dir(config)
    prepared = args.prepared or run_dir / "prepared"
    out_dir = args.output_dir or run_dir / "train"
    train_snr = parse_snr(args.snr) if args.snr is not None else config.noise.snr_db[0]

    outcome = train_on_prepared(config, read_prepared_index(prepared), train_snr, config.split, out_dir)
    write_resolved_config(config, Path(out_dir) / "resolved.ini")
    final = outcome.log.epochs[-1].mean_loss if outcome.log.epochs else float("nan")
    print(
        f"trained on {len(outcome.train_items)} utterances at {format_snr(train_snr)}; "
        f"final mean loss {final:.6f}; checkpoint {Path(out_dir) / 'model.gcic'}"
    )
    return EXIT_OK


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="Train a detector on prepared caches.")
    add_config_arguments(parser)
    parser.add_argument("--prepared", type=Path, default=None, help="Prepared directory. Default: <run dir>/prepared.")
    parser.add_argument("--output-dir", type=Path, default=None, help="Default: <run dir>/train.")
    parser.add_argument("--snr", default=None, help="Training SNR (dB or `clean`). Default: first noise.snr_db.")
    parser.add_argument("--epochs", type=int, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--learning-rate", type=float, default=None)
    parser.add_argument("--w-c", type=float, default=None, help="Classification loss weight.")
    parser.add_argument("--w-r", type=float, default=None, help="Regression loss weight.")
    parser.add_argument("--train-seed", type=int, default=None, help="Minibatch shuffling seed.")
    parser.add_argument("--seed", type=int, default=None, help="Initialisation and subsampling seed.")
    parser.add_argument("--split-mode", choices=["utterance", "speaker", "dataset"], default=None)
    parser.add_argument("--train-fraction", type=float, default=None)
    parser.add_argument("--train-groups", default=None, help="Comma-separated speaker/dataset ids to train on.")
    parser.set_defaults(handler=run)
