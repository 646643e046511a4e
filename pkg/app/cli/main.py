"""
gcinet: glottal closure instant detection toolkit.

    gcinet synth       synthetic voiced speech + GCI labels (+ EGG) + manifest
    gcinet prepare     reference labels, noise mixing, framing -> dataset caches
    gcinet train       split, train, checkpoint + loss log
    gcinet detect      checkpoint + wav -> GCI label file
    gcinet eval        reference vs detected labels -> IDR/MR/FAR/IDA
    gcinet experiment  every condition of a config, end to end

Exit codes: 0 success, 1 usage, 2 data, 3 numerical failure.
"""

from __future__ import annotations

import logging
import sys
from typing import Sequence

from pydantic import ValidationError

from app.cli import detect, evaluate, experiment, prepare, synth, train
from app.cli.common import CliParser
from app.core.config import settings
from app.core.errors import EXIT_OK, EXIT_USAGE, GciNetError

logger = logging.getLogger(__name__)

COMMANDS = (synth, prepare, train, detect, evaluate, experiment)


def build_parser() -> CliParser:
    parser = CliParser(prog="gcinet", description="Glottal closure instant detection toolkit.")
    parser.add_argument(
        "--log-level",
        default=settings.GCINET_LOG_LEVEL,
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Root log level (env GCINET_LOG_LEVEL).",
    )
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.log_level)
        code = args.handler(args)
        return EXIT_OK if code is None else code
    except GciNetError as exc:
        logger.debug("command_failed detail=%s", exc.to_detail())
        print(f"{exc.code}: {exc.message}", file=sys.stderr)
        return exc.exit_code
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"]) or exc.title
        print(f"BAD_ARGUMENTS: {where}: {first['msg']}", file=sys.stderr)
        return EXIT_USAGE
