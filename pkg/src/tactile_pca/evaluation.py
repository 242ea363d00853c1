"""Evaluation summaries for where/what predictions.

All errors are in physical units. For circular identity classes
(orientations) differences wrap at 360 degrees.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.stats import spearmanr

from .data_model import ClassLabel, what_diff


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class PredictionRecord:
    true: ClassLabel
    pred: ClassLabel
    method: str  # "knn" | "prob"


def _values(records: Sequence[PredictionRecord], axis: str) -> tuple[np.ndarray, np.ndarray]:
    if axis == "loc":
        return (np.array([r.true.loc_value for r in records]),
                np.array([r.pred.loc_value for r in records]))
    if axis == "id":
        return (np.array([r.true.id_value for r in records]),
                np.array([r.pred.id_value for r in records]))
    raise EvaluationError(f"axis must be 'loc' or 'id', got {axis!r}")


def regression_gradient(records: Sequence[PredictionRecord], axis: str) -> float:
    """Slope of the zero-intercept least-squares fit of predicted on actual."""
    if not records:
        raise EvaluationError("no records")
    actual, pred = _values(records, axis)
    denom = float(np.sum(actual * actual))
    if denom == 0.0:
        raise EvaluationError("all actual values are zero")
    return float(np.sum(pred * actual) / denom)


def what_errors(records: Sequence[PredictionRecord], circular: bool = False) -> np.ndarray:
    actual, pred = _values(records, "id")
    return what_diff(pred, actual, circular)


def what_rmse(records: Sequence[PredictionRecord], circular: bool = False) -> float:
    if not records:
        raise EvaluationError("no records")
    e = what_errors(records, circular)
    return float(np.sqrt(np.mean(e * e)))


def percentile_summary(records: Sequence[PredictionRecord], axis: str) -> dict[int, dict[str, float]]:
    """Per actual class index: median, 25th and 75th percentile of predicted values."""
    groups: dict[int, list[float]] = defaultdict(list)
    for r in records:
        if axis == "loc":
            groups[r.true.loc_index].append(r.pred.loc_value)
        else:
            groups[r.true.id_index].append(r.pred.id_value)
    if not groups:
        raise EvaluationError("no records")
    out = {}
    for key in sorted(groups):
        vals = np.asarray(groups[key], dtype=float)
        if vals.size == 0:
            raise EvaluationError(f"empty group {key}")
        p25, med, p75 = np.percentile(vals, [25, 50, 75])
        out[key] = {"median": float(med), "p25": float(p25), "p75": float(p75)}
    return out


def error_by_location(records: Sequence[PredictionRecord], circular: bool = False) -> dict[int, float]:
    """Mean absolute identity error for each true location index."""
    groups: dict[int, list[float]] = defaultdict(list)
    errors = what_errors(records, circular) if records else []
    for r, e in zip(records, errors):
        groups[r.true.loc_index].append(float(e))
    return {k: float(np.mean(groups[k])) for k in sorted(groups)}


def rank_correlation(a: Sequence[float], b: Sequence[float]) -> float:
    rho = spearmanr(a, b).statistic
    return float(rho)


def by_method(records: Iterable[PredictionRecord]) -> dict[str, list[PredictionRecord]]:
    out: dict[str, list[PredictionRecord]] = defaultdict(list)
    for r in records:
        out[r.method].append(r)
    return dict(sorted(out.items()))


def report(records: Sequence[PredictionRecord], circular: bool = False) -> dict:
    """JSON-ready summary: gradients, RMSEs and per-location errors per method."""
    out = {}
    for method, recs in by_method(records).items():
        entry = {"n": len(recs)}
        for axis in ("id", "loc"):
            try:
                entry[f"{axis}_gradient"] = regression_gradient(recs, axis)
            except EvaluationError:
                entry[f"{axis}_gradient"] = None
        entry["what_rmse"] = what_rmse(recs, circular)
        idx_err = np.array([abs(r.pred.id_index - r.true.id_index) for r in recs], dtype=float)
        entry["what_rmse_classes"] = float(np.sqrt(np.mean(idx_err**2)))
        loc_values = {r.true.loc_index: r.true.loc_value for r in recs}
        entry["error_by_location"] = [
            {"loc_index": k, "loc_value": loc_values[k], "mean_abs_what_error": v}
            for k, v in error_by_location(recs, circular).items()
        ]
        out[method] = entry
    return out


# --- CSV -------------------------------------------------------------------

PREDICTION_COLUMNS = [
    "true_loc", "true_id", "pred_loc", "pred_id", "method",
    "true_loc_value", "true_id_value", "pred_loc_value", "pred_id_value",
]


def write_predictions(records: Sequence[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PREDICTION_COLUMNS)
        for r in records:
            w.writerow([
                r.true.loc_index, r.true.id_index, r.pred.loc_index, r.pred.id_index, r.method,
                repr(r.true.loc_value), repr(r.true.id_value),
                repr(r.pred.loc_value), repr(r.pred.id_value),
            ])


def read_predictions(path: str | Path) -> list[PredictionRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if rows and set(PREDICTION_COLUMNS) - set(rows[0]):
        raise EvaluationError(f"{path}: missing columns {sorted(set(PREDICTION_COLUMNS) - set(rows[0]))}")
    return [
        PredictionRecord(
            ClassLabel(int(r["true_loc"]), int(r["true_id"]),
                       float(r["true_loc_value"]), float(r["true_id_value"])),
            ClassLabel(int(r["pred_loc"]), int(r["pred_id"]),
                       float(r["pred_loc_value"]), float(r["pred_id_value"])),
            r["method"],
        )
        for r in rows
    ]
