"""
Centralized runtime configuration for GCINET.

Values here are process-wide defaults read from the environment. Per-run
experiment parameters (framing, model, training, clustering) live in the INI
experiment files parsed by `app.services.experiment_config_service`; the
settings below only decide where runs go and how chatty they are.

Precedence:
- Existing OS environment variables win.
- A `.env` file at the project root fills only missing keys.
"""

import os
from pathlib import Path

from dotenv import load_dotenv
from pydantic import BaseModel

_PROJECT_ROOT = Path(__file__).resolve().parents[2]
load_dotenv(_PROJECT_ROOT / ".env", override=False)


def _as_bool(value: str | None, default: bool) -> bool:
    if value is None:
        return default
    return value.strip().lower() in {"1", "true", "yes", "y", "on"}


def _as_int(value: str | None, default: int) -> int:
    if value is None:
        return default
    try:
        return int(value.strip())
    except Exception:
        return default


class Settings(BaseModel):
    # Root directory for CLI run output when --output-dir is not given.
    GCINET_OUTPUT_ROOT: str = os.getenv("GCINET_OUTPUT_ROOT", "runs").strip() or "runs"

    # Root logger level used by the CLI (DEBUG, INFO, WARNING, ...).
    GCINET_LOG_LEVEL: str = os.getenv("GCINET_LOG_LEVEL", "INFO").strip().upper()

    # Seed used by subcommands when neither the config file nor a flag sets one.
    GCINET_DEFAULT_SEED: int = _as_int(os.getenv("GCINET_DEFAULT_SEED"), 7)

    # Frames per forward call during inference. Bounds memory; results agree
    # across sizes only up to float rounding (around 1e-15).
    GCINET_INFERENCE_BATCH_SIZE: int = _as_int(
        os.getenv("GCINET_INFERENCE_BATCH_SIZE"), 1024
    )

    # Flow-level progress logs (non-functional logging only).
    # Master switch for every category below.
    FLOW_LOGS_ENABLED: bool = _as_bool(os.getenv("FLOW_LOGS_ENABLED"), True)
    # Per-epoch training progress.
    FLOW_LOGS_TRAINING_ENABLED: bool = _as_bool(
        os.getenv("FLOW_LOGS_TRAINING_ENABLED"), True
    )
    # Per-utterance candidate/cluster counts.
    FLOW_LOGS_INFERENCE_ENABLED: bool = _as_bool(
        os.getenv("FLOW_LOGS_INFERENCE_ENABLED"), True
    )
    # Per-condition experiment orchestration.
    FLOW_LOGS_EXPERIMENT_ENABLED: bool = _as_bool(
        os.getenv("FLOW_LOGS_EXPERIMENT_ENABLED"), True
    )


settings = Settings()
