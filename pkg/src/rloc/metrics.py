"""Evaluation metrics: error quantiles, detection and repair quality, candidate sets."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence

import numpy as np

from .errors import MetricError

REPORT_KEYS = ("mean_m", "median_m", "p67_m", "p90_m", "p95_m", "precision", "recall", "f_score",
               "repair_accuracy", "i_d", "i_s", "i_l", "p_c", "mean_candidates")


def nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    """Smallest value with at least ``q`` of the data at or below it."""
    n = len(sorted_values)
    if n == 0:
        raise MetricError("quantile of an empty list")
    rank = max(1, math.ceil(q * n - 1e-9))
    return float(sorted_values[min(rank, n) - 1])


@dataclass(frozen=True)
class ErrorQuantiles:
    mean_m: float
    median_m: float
    p67_m: float
    p90_m: float
    p95_m: float


def quantiles_of(errors: Sequence[float]) -> ErrorQuantiles:
    e = np.sort(np.asarray(errors, dtype=float))
    if len(e) == 0:
        raise MetricError("no errors to summarize")
    return ErrorQuantiles(float(e.mean()), nearest_rank(e, 0.5), nearest_rank(e, 0.67),
                          nearest_rank(e, 0.9), nearest_rank(e, 0.95))


def planar_errors(pred: Sequence, truth: Sequence, grid) -> np.ndarray:
    """Meter distances between (lon, lat) pairs under the grid's projection."""
    if len(pred) != len(truth):
        raise MetricError(f"{len(pred)} predictions vs {len(truth)} truths")
    return np.array([grid.distance_m(p, t) for p, t in zip(pred, truth)], dtype=float)


def error_quantiles(pred: Sequence, truth: Sequence, grid) -> ErrorQuantiles:
    return quantiles_of(planar_errors(pred, truth, grid))


def detection_metrics(detected: Iterable, truth: Iterable) -> tuple:
    """(precision, recall, F) of a detected flawed set against the true one."""
    d, g = set(detected), set(truth)
    hit = len(d & g)
    p = hit / len(d) if d else (1.0 if not g else 0.0)
    r = hit / len(g) if g else (1.0 if not d else 0.0)
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def _ratio(before: float, after: float) -> float:
    return (before - after) / before if before > 0 else 0.0


def repair_metrics(before: Sequence[float], after: Sequence[float], detected: Iterable,
                   repaired_grids: dict, truth_grids: dict, tau: Optional[float] = None,
                   criterion: str = "grid", repaired_errors: Optional[dict] = None) -> tuple:
    """(r_alpha, I_d, I_s, I_l).

    ``detected`` holds sample keys; ``repaired_grids`` and ``truth_grids`` map
    keys to grid ids. With ``criterion="tau"`` a detected sample counts as
    correctly repaired when ``repaired_errors[key] <= tau``.
    """
    if len(before) != len(after):
        raise MetricError("before/after error lists differ in length")
    det = list(detected)
    if not det:
        r_alpha = None
    elif criterion == "grid":
        r_alpha = sum(repaired_grids.get(k) == truth_grids[k] for k in det) / len(det)
    elif criterion == "tau":
        if tau is None or repaired_errors is None:
            raise MetricError("tau criterion needs tau and per-sample repaired errors")
        r_alpha = sum(repaired_errors[k] <= tau for k in det) / len(det)
    else:
        raise MetricError(f"unknown repair criterion {criterion!r}")
    qb, qa = quantiles_of(before), quantiles_of(after)
    return (r_alpha, _ratio(qb.median_m, qa.median_m), _ratio(qb.p67_m, qa.p67_m),
            _ratio(qb.p95_m, qa.p95_m))


def candidate_metrics(candidates: Sequence[Sequence], truth_grids: Sequence) -> tuple:
    """(p_c, mean |C|); both None when no flawed sample was given."""
    if len(candidates) != len(truth_grids):
        raise MetricError("candidate sets and truth grids misaligned")
    if not candidates:
        return None, None
    hits = sum(t in set(c) for c, t in zip(candidates, truth_grids))
    return hits / len(candidates), float(np.mean([len(c) for c in candidates]))


@dataclass
class EvalReport:
    mean_m: float
    median_m: float
    p67_m: float
    p90_m: float
    p95_m: float
    precision: Optional[float] = None
    recall: Optional[float] = None
    f_score: Optional[float] = None
    repair_accuracy: Optional[float] = None
    i_d: Optional[float] = None
    i_s: Optional[float] = None
    i_l: Optional[float] = None
    p_c: Optional[float] = None
    mean_candidates: Optional[float] = None
    n_samples: int = 0
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n")


def write_errors_csv(rows: Iterable[tuple], stream: IO) -> None:
    """rows of (imsi, timestamp, error_before_m, error_after_m)."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["imsi", "timestamp", "error_before_m", "error_after_m"])
    for imsi, ts, b, a in rows:
        w.writerow([imsi, ts, f"{b:.3f}", f"{a:.3f}"])
