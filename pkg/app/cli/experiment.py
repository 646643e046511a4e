from __future__ import annotations

import argparse
from pathlib import Path

from app.cli.common import add_config_arguments, load_config
from app.core.errors import EXIT_DATA, EXIT_OK, UsageError
from app.services.experiment_service import ExperimentRunner, format_results


def run(args: argparse.Namespace) -> int:
    if args.config is None:
        raise UsageError(code="BAD_ARGUMENTS", message="experiment needs --config.")
    if args.jobs < 1:
        raise UsageError(code="BAD_ARGUMENTS", message="--jobs must be >= 1.")
    runner = ExperimentRunner(load_config(args, {}), args.output_dir, jobs=args.jobs)
    table = runner.run()
    print(format_results(table), end="")
    return EXIT_OK if (table["status"] == "ok").all() else EXIT_DATA


def register(subparsers) -> None:
    parser = subparsers.add_parser("experiment", help="Run every condition of an experiment config.")
    add_config_arguments(parser)
    parser.add_argument("--output-dir", type=Path, default=None, help="Default: experiment.output_dir.")
    parser.add_argument("--jobs", type=int, default=1, help="Conditions run in parallel processes.")
    parser.set_defaults(handler=run)
