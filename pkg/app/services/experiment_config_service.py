"""
INI experiment files. Sections map onto ExperimentConfig:

    [experiment]            name, output_dir, seed
    [corpus] [noise] [framing] [model] [train] [cluster] [split]
    [condition.<name>]      train_snr, test_snrs, split_mode, split_train_fraction,
                            split_seed, split_train_groups

Comma-separated values become tuples; `clean` is the noiseless SNR and `none`
leaves dilations to the default rule.
"""

from __future__ import annotations

import configparser
import math
from pathlib import Path
from typing import Any, Sequence

from pydantic import ValidationError

from app.core.errors import UsageError
from app.schemas.experiment import ExperimentConfig, format_snr

CONDITION_PREFIX = "condition."
PLAIN_SECTIONS = ("corpus", "noise", "framing", "model", "train", "cluster", "split")
_SPLIT_KEYS = {"split_mode": "mode", "split_train_fraction": "train_fraction", "split_seed": "seed", "split_train_groups": "train_groups"}


def _new_parser() -> configparser.ConfigParser:
    # Keys keep their case; inline `;` comments are allowed.
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    return parser


def apply_overrides(parser: configparser.ConfigParser, overrides: Sequence[str]) -> None:
    """Each override is `section.key=value`; the section is created if missing."""
    for item in overrides:
        name, sep, value = item.partition("=")
        section, dot, key = name.strip().rpartition(".")
        if not sep or not dot or not section or not key:
            raise UsageError(code="BAD_OVERRIDE", message=f"Override {item!r} is not section.key=value.")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, value.strip())


def _dilations(value: str) -> Any:
    if value.strip().lower() in {"none", ""}:
        return None
    return tuple(int(token) for token in value.split(","))


def _section_values(parser: configparser.ConfigParser, section: str) -> dict[str, Any]:
    values: dict[str, Any] = dict(parser.items(section))
    if section == "model" and "dilations" in values:
        values["dilations"] = _dilations(values["dilations"])
    return values


def _config_payload(parser: configparser.ConfigParser, base_dir: Path) -> dict[str, Any]:
    payload: dict[str, Any] = {}
    conditions: list[dict[str, Any]] = []
    for section in parser.sections():
        if section == "experiment":
            payload.update(parser.items(section))
        elif section in PLAIN_SECTIONS:
            payload[section] = _section_values(parser, section)
        elif section.startswith(CONDITION_PREFIX):
            values = dict(parser.items(section))
            split = {_SPLIT_KEYS[key]: values.pop(key) for key in list(values) if key in _SPLIT_KEYS}
            if split:
                values["split"] = split
            values["name"] = section[len(CONDITION_PREFIX) :]
            conditions.append(values)
        else:
            raise UsageError(code="UNKNOWN_SECTION", message=f"Unknown config section [{section}].")
    payload["conditions"] = conditions

    corpus = payload.get("corpus") or {}
    if "manifest" in corpus:
        corpus["manifest"] = str(_resolve(base_dir, corpus["manifest"]))
    noise = payload.get("noise") or {}
    if noise.get("source", "white") != "white":
        noise["source"] = str(_resolve(base_dir, noise["source"]))
    return payload


def _resolve(base_dir: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base_dir / path


def load_experiment_config(path: str | Path | None, overrides: Sequence[str] = ()) -> ExperimentConfig:
    """
    Relative corpus/noise paths resolve against the config file's directory
    (the working directory when there is no file).
    """
    parser = _new_parser()
    base_dir = Path.cwd()
    if path is not None:
        target = Path(path)
        if not target.is_file():
            raise UsageError(code="CONFIG_NOT_FOUND", message=f"{target} does not exist.")
        try:
            parser.read(target, encoding="utf-8")
        except configparser.Error as exc:
            raise UsageError(code="CONFIG_UNPARSEABLE", message=f"{target}: {exc}") from exc
        base_dir = target.parent
    apply_overrides(parser, overrides)

    try:
        config = ExperimentConfig.model_validate(_config_payload(parser, base_dir))
    except ValidationError as exc:
        first = exc.errors()[0]
        where = ".".join(str(part) for part in first["loc"])
        raise UsageError(code="CONFIG_INVALID", message=f"{where}: {first['msg']}") from exc
    except ValueError as exc:
        raise UsageError(code="CONFIG_INVALID", message=str(exc)) from exc

    if config.noise.source != "white" and not Path(config.noise.source).is_file():
        raise UsageError(code="CONFIG_INVALID", message=f"Noise file {config.noise.source} does not exist.")
    return config


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "inf" if math.isinf(value) else repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_format(v) for v in value)
    return str(value)


def dump_experiment_config(config: ExperimentConfig) -> str:
    """Every field spelled out, so the text alone reproduces the run."""
    parser = _new_parser()
    parser["experiment"] = {"name": config.name, "seed": str(config.seed)}
    if config.output_dir is not None:
        parser["experiment"]["output_dir"] = str(config.output_dir)
    for section in PLAIN_SECTIONS:
        if getattr(config, section) is None:
            continue
        data = getattr(config, section).model_dump(mode="python")
        if section == "noise":
            data["snr_db"] = [format_snr(s) for s in config.noise.snr_db]
        if section == "model":
            # Frame sizes follow [framing] and the corpus sample rate.
            data.pop("wd_samples")
            data.pop("wi_samples")
            if data["dilations"] is None:
                data["dilations"] = "none"
        parser[section] = {key: _format(value) for key, value in data.items() if value is not None}
    for condition in config.conditions:
        values = {
            "train_snr": format_snr(condition.train_snr),
            "test_snrs": ", ".join(format_snr(s) for s in condition.test_snrs),
        }
        if condition.split is not None:
            for flat, field in _SPLIT_KEYS.items():
                values[flat] = _format(getattr(condition.split, field))
        parser[CONDITION_PREFIX + condition.name] = values

    lines: list[str] = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in parser.items(section))
        lines.append("")
    return "\n".join(lines)


def write_resolved_config(config: ExperimentConfig, path: str | Path) -> None:
    Path(path).write_text(dump_experiment_config(config), encoding="utf-8", newline="\n")
