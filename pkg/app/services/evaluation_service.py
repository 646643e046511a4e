"""
Larynx-cycle scoring. Reference GCI r_k owns the cycle
((r_{k-1} + r_k) / 2, (r_k + r_{k+1}) / 2]; the first and last cycles extend
outward by half the adjacent period. A cycle with exactly one detection is
identified, none is a miss, two or more is a false alarm.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from app.core.errors import DataError
from app.schemas.evaluation import CSV_COLUMNS, EvalReport
from app.schemas.signal import GciLabels

logger = logging.getLogger(__name__)

POOLED_ROW_ID = "__pooled__"


def cycle_edges(reference: np.ndarray) -> np.ndarray:
    reference = reference.astype(np.float64)
    first = reference[0] - (reference[1] - reference[0]) / 2.0
    last = reference[-1] + (reference[-1] - reference[-2]) / 2.0
    midpoints = (reference[:-1] + reference[1:]) / 2.0
    return np.concatenate(([first], midpoints, [last]))


def _percent(count: int, total: int) -> float:
    return 100.0 * count / total if total else 0.0


def _report(
    n_identified: int,
    n_missed: int,
    n_false_alarm: int,
    ignored: int,
    timing_errors: list[float],
) -> EvalReport:
    n_cycles = n_identified + n_missed + n_false_alarm
    ida_ms = float(np.std(timing_errors)) * 1000.0 if timing_errors else 0.0
    return EvalReport(
        idr=_percent(n_identified, n_cycles),
        mr=_percent(n_missed, n_cycles),
        far=_percent(n_false_alarm, n_cycles),
        ida=ida_ms,
        n_cycles=n_cycles,
        n_identified=n_identified,
        n_missed=n_missed,
        n_false_alarm=n_false_alarm,
        ignored_detections=ignored,
        timing_errors=timing_errors,
    )


def evaluate(reference: GciLabels, detected: GciLabels, sample_rate: int) -> EvalReport:
    if len(reference) < 2:
        raise DataError(
            code="TOO_FEW_REFERENCES",
            message=f"Need at least 2 reference GCIs to form cycles, got {len(reference)}.",
        )
    ref = reference.positions
    edges = cycle_edges(ref)
    found = detected.positions.astype(np.float64)

    # side="left" puts a detection sitting exactly on an edge into the earlier cycle.
    cycle = np.searchsorted(edges, found, side="left") - 1
    inside = (cycle >= 0) & (cycle < len(ref))
    ignored = int(np.count_nonzero(~inside))
    if ignored:
        logger.warning("evaluate_ignored_detections count=%d", ignored)

    counts = np.bincount(cycle[inside], minlength=len(ref))
    identified = np.flatnonzero(counts == 1)
    # For a cycle with one detection the per-cycle sum is that detection.
    sums = np.bincount(cycle[inside], weights=found[inside], minlength=len(ref))
    errors = (sums[identified] - ref[identified]) / float(sample_rate)

    return _report(
        n_identified=int(len(identified)),
        n_missed=int(np.count_nonzero(counts == 0)),
        n_false_alarm=int(np.count_nonzero(counts >= 2)),
        ignored=ignored,
        timing_errors=[float(e) for e in errors],
    )


def aggregate(reports: Sequence[EvalReport]) -> EvalReport:
    """Pool cycle counts and timing errors across utterances, then recompute."""
    if not reports:
        raise DataError(code="NOTHING_TO_AGGREGATE", message="aggregate() needs at least one report.")
    errors: list[float] = []
    for report in reports:
        errors.extend(report.timing_errors)
    return _report(
        n_identified=sum(r.n_identified for r in reports),
        n_missed=sum(r.n_missed for r in reports),
        n_false_alarm=sum(r.n_false_alarm for r in reports),
        ignored=sum(r.ignored_detections for r in reports),
        timing_errors=errors,
    )


def reports_table(rows: Sequence[tuple[str, EvalReport]], *, pooled: bool = True) -> pd.DataFrame:
    records = [report.to_row(utterance_id) for utterance_id, report in rows]
    if pooled and rows:
        records.append(aggregate([report for _, report in rows]).to_row(POOLED_ROW_ID))
    return pd.DataFrame(records, columns=CSV_COLUMNS)


def write_reports_csv(rows: Sequence[tuple[str, EvalReport]], path: str | Path, *, pooled: bool = True) -> None:
    reports_table(rows, pooled=pooled).to_csv(path, index=False, float_format="%.6f", lineterminator="\n")
