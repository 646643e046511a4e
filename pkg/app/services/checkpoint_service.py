"""Self-describing model checkpoints: full ModelConfig, parameters and Adamax state."""

from __future__ import annotations

import logging
from pathlib import Path

from app.core.binary_container import Container, read_container, write_container
from app.core.errors import ConfigConflictError, FormatError
from app.core.nn.optim import AdamaxState
from app.schemas.model import ModelConfig
from app.services.model_service import Model

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"GCIC"
CHECKPOINT_VERSION = 1


def save_checkpoint(model: Model, path: str | Path) -> None:
    state = model.optimizer
    arrays = {f"param/{name}": value for name, value in model.params.items()}
    arrays.update({f"adamax_m/{name}": value for name, value in state.m.items()})
    arrays.update({f"adamax_u/{name}": value for name, value in state.u.items()})
    container = Container(
        meta={
            "model_config": model.config.model_dump(mode="json"),
            "param_names": list(model.params),
            "optimizer": {
                "lr": state.lr,
                "beta1": state.beta1,
                "beta2": state.beta2,
                "eps": state.eps,
                "step": state.step,
            },
        },
        arrays=arrays,
    )
    write_container(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION, container)
    logger.info("checkpoint_saved path=%s step=%d n_params=%d", path, state.step, len(model.params))


def _section(container: Container, prefix: str, names: list[str], source: str) -> dict:
    try:
        return {name: container.arrays[f"{prefix}/{name}"] for name in names}
    except KeyError as exc:
        raise FormatError(code="MISSING_ARRAY", message=f"{source} lacks array {exc.args[0]!r}.") from exc


def load_checkpoint(
    path: str | Path,
    *,
    expected_wd_samples: int | None = None,
    expected_wi_samples: int | None = None,
) -> Model:
    container = read_container(path, magic=CHECKPOINT_MAGIC, version=CHECKPOINT_VERSION)
    source = str(path)
    cfg = ModelConfig.model_validate(container.meta["model_config"])
    check_geometry(cfg, expected_wd_samples, expected_wi_samples)

    names = list(container.meta["param_names"])
    optimizer = container.meta["optimizer"]
    state = AdamaxState(
        lr=float(optimizer["lr"]),
        beta1=float(optimizer["beta1"]),
        beta2=float(optimizer["beta2"]),
        eps=float(optimizer["eps"]),
        step=int(optimizer["step"]),
        m=_section(container, "adamax_m", names, source),
        u=_section(container, "adamax_u", names, source),
    )
    return Model(config=cfg, params=_section(container, "param", names, source), optimizer=state)


def check_geometry(cfg: ModelConfig, wd_samples: int | None, wi_samples: int | None) -> None:
    """Raise if a caller's framing disagrees with the one the model was trained for."""
    conflicts = []
    if wd_samples is not None and wd_samples != cfg.wd_samples:
        conflicts.append(f"wd_samples requested {wd_samples}, checkpoint has {cfg.wd_samples}")
    if wi_samples is not None and wi_samples != cfg.wi_samples:
        conflicts.append(f"wi_samples requested {wi_samples}, checkpoint has {cfg.wi_samples}")
    if conflicts:
        raise ConfigConflictError(code="CHECKPOINT_CONFIG_CONFLICT", message="; ".join(conflicts) + ".")
