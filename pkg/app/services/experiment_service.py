"""
Experiment orchestration: prepare the corpus once, then for every condition
train on the condition's split at its training SNR, detect on the held-out
utterances at each test SNR and score against the clean references.

Run directory layout:

    <run>/resolved.ini
    <run>/prepared/                       caches + prepared.csv
    <run>/conditions/<name>/resolved.ini
    <run>/conditions/<name>/model.gcic, loss.csv, split.csv
    <run>/conditions/<name>/detected/<snr>/<utterance>.txt
    <run>/conditions/<name>/eval_<snr>.csv
    <run>/conditions/<name>/rows.csv + DONE    (or FAILED)
    <run>/results.csv, results.txt
"""

from __future__ import annotations

import json
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import pandas as pd

from app.core.config import settings
from app.core.errors import ConfigConflictError, DataError, GciNetError, UsageError
from app.core.flow_logging import flow_info
from app.schemas.evaluation import EvalReport
from app.schemas.experiment import ConditionConfig, ExperimentConfig, Snr, SplitConfig, format_snr
from app.schemas.framing import FrameGeometry
from app.schemas.model import ModelConfig
from app.schemas.signal import Waveform
from app.services.checkpoint_service import save_checkpoint
from app.services.corpus_service import PreparedItem, load_manifest, prepare_corpus, read_prepared_index
from app.services.detection_service import detect_with_candidates
from app.services.evaluation_service import aggregate, evaluate, write_reports_csv
from app.services.experiment_config_service import write_resolved_config
from app.services.framing_service import (
    class_balance_subsample,
    concat_datasets,
    load_dataset_cache,
    train_test_split,
)
from app.services.model_service import Model, build_model
from app.services.signal_io_service import read_labels, write_labels
from app.services.training_service import TrainingLog, train

logger = logging.getLogger(__name__)

RESULT_COLUMNS = [
    "condition",
    "train_snr",
    "test_snr",
    "split_mode",
    "n_train",
    "n_test",
    "n_cycles",
    "idr",
    "mr",
    "far",
    "ida_ms",
    "status",
]
DONE_MARKER = "DONE"
FAILED_MARKER = "FAILED"
UNEXPECTED_ERROR_CODE = "UNEXPECTED_ERROR"


def model_config_for(model_cfg: ModelConfig, geometry: FrameGeometry) -> ModelConfig:
    """Frame sizes come from the framing; explicit model sizes must agree with it."""
    for field, wanted in (("wd_samples", geometry.wd), ("wi_samples", geometry.wi)):
        if field in model_cfg.model_fields_set and getattr(model_cfg, field) != wanted:
            raise ConfigConflictError(
                code="FRAMING_MISMATCH",
                message=f"model.{field}={getattr(model_cfg, field)} but the framing gives {wanted} samples.",
            )
    return ModelConfig.model_validate(
        {**model_cfg.model_dump(), "wd_samples": geometry.wd, "wi_samples": geometry.wi}
    )


def items_at(items: Sequence[PreparedItem], snr: Snr) -> list[PreparedItem]:
    return [item for item in items if item.snr_db == snr]


@dataclass
class TrainOutcome:
    model: Model
    log: TrainingLog
    train_items: list[PreparedItem]
    test_ids: list[str]


def train_on_prepared(
    config: ExperimentConfig,
    items: Sequence[PreparedItem],
    train_snr: Snr,
    split: SplitConfig,
    out_dir: str | Path,
) -> TrainOutcome:
    """Split whole utterances, train on the train share and write model.gcic, loss.csv, split.csv."""
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    pool = items_at(items, train_snr)
    if not pool:
        raise DataError(code="NOT_PREPARED", message=f"No prepared utterances at SNR {format_snr(train_snr)}.")
    train_items, test_items = train_test_split(
        pool,
        train_fraction=split.train_fraction,
        mode=split.mode,
        seed=split.seed,
        train_groups=split.train_groups or None,
    )
    if not train_items:
        raise DataError(code="EMPTY_TRAIN_SPLIT", message="The split left no utterances to train on.")
    if not test_items:
        logger.warning("split_no_test_utterances mode=%s", split.mode)

    dataset = concat_datasets([load_dataset_cache(item.cache) for item in train_items])
    dataset = class_balance_subsample(dataset, config.noise.neg_to_pos_ratio, config.seed)
    model = build_model(model_config_for(config.model, dataset.geometry), config.seed)
    flow_info(
        logger,
        "train_start train_snr=%s utterances=%d records=%d positives=%d",
        format_snr(train_snr),
        len(train_items),
        len(dataset),
        dataset.n_positive,
        category="training",
    )
    model, log = train(model, dataset, config.train)

    save_checkpoint(model, target / "model.gcic")
    log.to_frame().to_csv(target / "loss.csv", index=False, float_format="%.10g", lineterminator="\n")
    split_rows = [{"utterance_id": i.utterance_id, "role": "train"} for i in train_items]
    split_rows += [{"utterance_id": i.utterance_id, "role": "test"} for i in test_items]
    pd.DataFrame(split_rows, columns=["utterance_id", "role"]).to_csv(target / "split.csv", index=False, lineterminator="\n")
    return TrainOutcome(
        model=model,
        log=log,
        train_items=list(train_items),
        test_ids=[item.utterance_id for item in test_items],
    )


def detect_and_score(
    model: Model,
    config: ExperimentConfig,
    test_items: Sequence[PreparedItem],
    out_dir: str | Path,
) -> list[tuple[str, EvalReport]]:
    """Detect on each prepared (noisy) signal and score against its clean references."""
    target = Path(out_dir)
    target.mkdir(parents=True, exist_ok=True)
    rows: list[tuple[str, EvalReport]] = []
    for item in test_items:
        dataset = load_dataset_cache(item.cache)
        speech = Waveform(samples=dataset.signal, sample_rate=dataset.sample_rate)
        detected, _ = detect_with_candidates(
            model, speech, config.cluster, batch_size=settings.GCINET_INFERENCE_BATCH_SIZE
        )
        write_labels(detected, target / f"{item.utterance_id}.txt")
        rows.append((item.utterance_id, evaluate(read_labels(item.labels), detected, dataset.sample_rate)))
    return rows


def _result_row(condition: ConditionConfig, split: SplitConfig, test_snr: Snr, **values) -> dict:
    row = {
        "condition": condition.name,
        "train_snr": format_snr(condition.train_snr),
        "test_snr": format_snr(test_snr),
        "split_mode": split.mode,
        "n_train": 0,
        "n_test": 0,
        "n_cycles": 0,
        "idr": math.nan,
        "mr": math.nan,
        "far": math.nan,
        "ida_ms": math.nan,
        "status": "ok",
    }
    row.update(values)
    return row


def run_condition(
    config: ExperimentConfig,
    condition: ConditionConfig,
    items: Sequence[PreparedItem],
    run_dir: str | Path,
) -> list[dict]:
    """
    One condition end to end. Completed conditions are read back from their
    DONE marker; a failure is written to FAILED and returned as rows with the
    error code in `status` instead of being raised. Errors outside the GciNetError
    family are recorded as UNEXPECTED_ERROR with their traceback.
    """
    condition_dir = Path(run_dir) / "conditions" / condition.name
    rows_path = condition_dir / "rows.csv"
    if (condition_dir / DONE_MARKER).exists() and rows_path.exists():
        flow_info(logger, "condition_skipped name=%s reason=done", condition.name, category="experiment")
        return pd.read_csv(rows_path, dtype={"train_snr": str, "test_snr": str}).to_dict(orient="records")

    condition_dir.mkdir(parents=True, exist_ok=True)
    (condition_dir / FAILED_MARKER).unlink(missing_ok=True)
    write_resolved_config(config, condition_dir / "resolved.ini")
    split = config.split_for(condition)
    try:
        outcome = train_on_prepared(config, items, condition.train_snr, split, condition_dir)
        test_ids = set(outcome.test_ids)
        rows: list[dict] = []
        for test_snr in condition.test_snrs:
            test_items = [item for item in items_at(items, test_snr) if item.utterance_id in test_ids]
            scored = detect_and_score(outcome.model, config, test_items, condition_dir / "detected" / format_snr(test_snr))
            if scored:
                write_reports_csv(scored, condition_dir / f"eval_{format_snr(test_snr)}.csv")
                pooled = aggregate([report for _, report in scored])
                metrics = {"n_cycles": pooled.n_cycles, "idr": pooled.idr, "mr": pooled.mr, "far": pooled.far, "ida_ms": pooled.ida}
            else:
                metrics = {"status": "no_test_utterances"}
            rows.append(
                _result_row(condition, split, test_snr, n_train=len(outcome.train_items), n_test=len(test_items), **metrics)
            )
            flow_info(
                logger,
                "condition_scored name=%s test_snr=%s idr=%.2f far=%.2f",
                condition.name,
                format_snr(test_snr),
                rows[-1]["idr"],
                rows[-1]["far"],
                category="experiment",
            )
    except GciNetError as exc:
        logger.warning("condition_failed name=%s code=%s message=%s", condition.name, exc.code, exc.message)
        (condition_dir / FAILED_MARKER).write_text(json.dumps(exc.to_detail(), sort_keys=True) + "\n", encoding="utf-8")
        return [_result_row(condition, split, snr, status=f"failed:{exc.code}") for snr in condition.test_snrs]
    except Exception as exc:
        logger.exception("condition_crashed name=%s error=%s", condition.name, type(exc).__name__)
        detail = {
            "code": UNEXPECTED_ERROR_CODE,
            "message": str(exc),
            "error_type": type(exc).__name__,
            "traceback": traceback.format_exc(),
        }
        (condition_dir / FAILED_MARKER).write_text(json.dumps(detail, sort_keys=True) + "\n", encoding="utf-8")
        return [_result_row(condition, split, snr, status=f"failed:{UNEXPECTED_ERROR_CODE}") for snr in condition.test_snrs]

    pd.DataFrame(rows, columns=RESULT_COLUMNS).to_csv(rows_path, index=False, lineterminator="\n")
    (condition_dir / DONE_MARKER).write_text("ok\n", encoding="utf-8")
    return rows


def _condition_job(config: ExperimentConfig, condition: ConditionConfig, prepared_dir: str, run_dir: str) -> list[dict]:
    return run_condition(config, condition, read_prepared_index(prepared_dir), run_dir)


def default_run_dir(config: ExperimentConfig) -> Path:
    if config.output_dir is not None:
        return Path(config.output_dir)
    return Path(settings.GCINET_OUTPUT_ROOT) / config.name


def format_results(table: pd.DataFrame) -> str:
    return table.to_string(index=False, float_format=lambda value: f"{value:.2f}") + "\n"


class ExperimentRunner:
    def __init__(self, config: ExperimentConfig, run_dir: str | Path | None = None, *, jobs: int = 1) -> None:
        self.config = config
        self.run_dir = Path(run_dir) if run_dir is not None else default_run_dir(config)
        self.jobs = max(1, jobs)

    @property
    def prepared_dir(self) -> Path:
        return self.run_dir / "prepared"

    def prepare(self, out_dir: str | Path | None = None) -> list[PreparedItem]:
        if self.config.corpus is None:
            raise UsageError(code="NO_CORPUS", message="The experiment config needs a [corpus] section with a manifest.")
        entries = load_manifest(self.config.corpus.manifest)
        return prepare_corpus(
            entries,
            self.prepared_dir if out_dir is None else out_dir,
            corpus=self.config.corpus,
            noise=self.config.noise,
            framing=self.config.framing,
            seed=self.config.seed,
        )

    def run(self) -> pd.DataFrame:
        self.run_dir.mkdir(parents=True, exist_ok=True)
        write_resolved_config(self.config, self.run_dir / "resolved.ini")
        items = self.prepare()
        conditions = self.config.effective_conditions()
        flow_info(
            logger,
            "experiment_start name=%s conditions=%d jobs=%d",
            self.config.name,
            len(conditions),
            self.jobs,
            category="experiment",
        )

        if self.jobs == 1:
            per_condition = [run_condition(self.config, c, items, self.run_dir) for c in conditions]
        else:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                futures = [
                    pool.submit(_condition_job, self.config, c, str(self.prepared_dir), str(self.run_dir))
                    for c in conditions
                ]
                per_condition = [future.result() for future in futures]

        table = pd.DataFrame([row for rows in per_condition for row in rows], columns=RESULT_COLUMNS)
        table.to_csv(self.run_dir / "results.csv", index=False, float_format="%.6f", lineterminator="\n")
        (self.run_dir / "results.txt").write_text(format_results(table), encoding="utf-8", newline="\n")
        failed = int((table["status"] != "ok").sum())
        flow_info(logger, "experiment_done name=%s rows=%d not_ok=%d", self.config.name, len(table), failed, category="experiment")
        return table
