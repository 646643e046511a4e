from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd

from app.core.errors import ConfigConflictError, DataError, NumericalError
from app.core.flow_logging import flow_info
from app.core.nn.optim import adamax_step
from app.schemas.model import TrainConfig
from app.services.framing_service import FrameDataset
from app.services.model_service import Model, backward, forward_with_cache

logger = logging.getLogger(__name__)


@dataclass
class LossResult:
    loss: float
    classification: float
    regression: float
    grad_y_c: np.ndarray
    grad_y_r: np.ndarray


@dataclass
class EpochLog:
    epoch: int
    mean_loss: float
    mean_classification: float
    mean_regression: float
    n_batches: int
    n_positives: int


@dataclass
class TrainingLog:
    epochs: list[EpochLog] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [entry.mean_loss for entry in self.epochs]

    def to_frame(self) -> pd.DataFrame:
        columns = ["epoch", "mean_loss", "mean_classification", "mean_regression", "n_batches", "n_positives"]
        return pd.DataFrame([vars(entry) for entry in self.epochs], columns=columns)


def joint_loss(
    y_c: np.ndarray,
    y_r: np.ndarray,
    t_c: np.ndarray,
    t_r: np.ndarray,
    w_c: float,
    w_r: float,
    prob_clip: float = 1e-7,
) -> LossResult:
    """
    Negated weighted cross-entropy over all records plus squared location error
    over positive records only, divided by the number of positives (0 if none).
    Gradients are with respect to the head outputs y_c and y_r.
    """
    y_c = np.asarray(y_c, dtype=np.float64)
    y_r = np.asarray(y_r, dtype=np.float64)
    t_c = np.asarray(t_c, dtype=np.float64)
    t_r = np.asarray(t_r, dtype=np.float64)
    n = y_c.shape[0]
    if n < 1:
        raise DataError(code="EMPTY_BATCH", message="joint_loss needs at least one record.")

    clipped = np.clip(y_c, prob_clip, 1.0 - prob_clip)
    classification = -(w_c / n) * float(np.sum(t_c * np.log(clipped) + (1.0 - t_c) * np.log1p(-clipped)))
    # The clip is flat outside its interval.
    inside = (y_c > prob_clip) & (y_c < 1.0 - prob_clip)
    grad_y_c = np.where(inside, -(w_c / n) * (t_c / clipped - (1.0 - t_c) / (1.0 - clipped)), 0.0)

    n_positive = float(np.sum(t_c))
    if n_positive > 0:
        residual = t_r - y_r
        regression = (w_r / n_positive) * float(np.sum(t_c * residual**2))
        grad_y_r = (w_r / n_positive) * (-2.0) * residual * t_c
    else:
        regression = 0.0
        grad_y_r = np.zeros_like(y_r)

    return LossResult(
        loss=classification + regression,
        classification=classification,
        regression=regression,
        grad_y_c=grad_y_c,
        grad_y_r=grad_y_r,
    )


def train(model: Model, dataset: FrameDataset, tc: TrainConfig) -> tuple[Model, TrainingLog]:
    if len(dataset) == 0:
        raise DataError(code="EMPTY_DATASET", message="Cannot train on an empty dataset.")
    geometry = dataset.geometry
    if (geometry.wd, geometry.wi) != (model.config.wd_samples, model.config.wi_samples):
        raise ConfigConflictError(
            code="FRAMING_MISMATCH",
            message=(
                f"Dataset frames are wd={geometry.wd}/wi={geometry.wi} samples but the model expects "
                f"wd={model.config.wd_samples}/wi={model.config.wi_samples}."
            ),
        )

    rng = np.random.default_rng(tc.seed)
    params = model.params
    # Moments carry over from a resumed checkpoint; hyperparameters come from tc.
    state = replace(model.optimizer, lr=tc.learning_rate, beta1=tc.beta1, beta2=tc.beta2, eps=tc.epsilon)
    log = TrainingLog()
    batch_index = 0
    n_records = len(dataset)

    for epoch in range(1, tc.epochs + 1):
        order = rng.permutation(n_records)
        totals = np.zeros(3)
        n_batches = 0
        for start in range(0, n_records, tc.batch_size):
            indices = order[start : start + tc.batch_size]
            current = replace(model, params=params, optimizer=state)
            try:
                cache = forward_with_cache(current, dataset.frames(indices))
                result = joint_loss(
                    cache.y_c, cache.y_r, dataset.t_c[indices], dataset.t_r[indices], tc.w_c, tc.w_r, tc.prob_clip
                )
                if not np.isfinite(result.loss):
                    raise NumericalError(code="NON_FINITE", message="Loss is NaN or Inf.", operator="joint_loss")
                grads = backward(current, cache, result.grad_y_c, result.grad_y_r)
                params, state = adamax_step(params, grads, state)
            except NumericalError as exc:
                logger.error("training_aborted epoch=%d batch_index=%d operator=%s", epoch, batch_index, exc.operator)
                raise NumericalError(
                    code=exc.code,
                    message=f"{exc.message} (epoch {epoch}, batch {batch_index})",
                    operator=exc.operator,
                    batch_index=batch_index,
                ) from exc
            totals += (result.loss, result.classification, result.regression)
            n_batches += 1
            batch_index += 1

        means = totals / n_batches
        log.epochs.append(
            EpochLog(
                epoch=epoch,
                mean_loss=float(means[0]),
                mean_classification=float(means[1]),
                mean_regression=float(means[2]),
                n_batches=n_batches,
                n_positives=dataset.n_positive,
            )
        )
        flow_info(
            logger,
            "training_epoch_done epoch=%d mean_loss=%.6f classification=%.6f regression=%.6f",
            epoch,
            means[0],
            means[1],
            means[2],
            category="training",
        )

    return replace(model, params=params, optimizer=state), log
