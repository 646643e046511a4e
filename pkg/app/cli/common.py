from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any

from app.core.config import settings
from app.core.errors import UsageError
from app.schemas.experiment import ExperimentConfig
from app.services.experiment_config_service import load_experiment_config


class CliParser(argparse.ArgumentParser):
    """argparse that reports bad usage as UsageError instead of exiting."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(code="BAD_ARGUMENTS", message=f"{self.prog}: {message}")


def add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="INI experiment config file.")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override one config value; repeatable. Applied after flags.",
    )


def flag_overrides(args: argparse.Namespace, mapping: dict[str, str]) -> list[str]:
    """`section.key=value` strings for every flag in `mapping` that was given."""
    overrides: list[str] = []
    for attribute, key in mapping.items():
        value: Any = getattr(args, attribute, None)
        if value is None or value is False:
            continue
        if value is True:
            value = "true"
        elif isinstance(value, Path):
            value = value.resolve()
        elif isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        overrides.append(f"{key}={value}")
    return overrides


def load_config(args: argparse.Namespace, mapping: dict[str, str]) -> ExperimentConfig:
    return load_experiment_config(args.config, flag_overrides(args, mapping) + list(args.overrides))


def output_root() -> Path:
    return Path(settings.GCINET_OUTPUT_ROOT)
