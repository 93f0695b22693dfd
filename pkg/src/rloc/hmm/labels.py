"""Confidence labels: a prediction is flawed (state 0) when its error exceeds tau."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import LabelingError
from ..metrics import nearest_rank

FLAWED = 0
NORMAL = 1


def compute_tau(errors: Sequence[float], quantile: float) -> float:
    """Nearest-rank ``quantile`` of the confidence-training errors."""
    if len(errors) == 0:
        raise LabelingError("cannot estimate tau from an empty error list")
    if not 0.0 < quantile < 1.0:
        raise LabelingError(f"tau quantile {quantile} outside (0, 1)")
    return nearest_rank(np.sort(np.asarray(errors, dtype=float)), quantile)


def label_confidence(errors: Sequence, tau: float) -> np.ndarray:
    """State per sample; ``None`` or NaN errors mean the truth is missing."""
    out = np.empty(len(errors), dtype=np.int8)
    for i, e in enumerate(errors):
        if e is None or not math.isfinite(e):
            raise LabelingError(f"sample {i} has no ground truth to label")
        out[i] = FLAWED if e > tau else NORMAL
    return out


@dataclass(frozen=True)
class LabeledSequence:
    imsi: str
    observations: tuple
    states: tuple
    deltas: tuple

    def __post_init__(self):
        if len(self.observations) != len(self.states):
            raise ValueError("observations and states must align")
        if len(self.deltas) != max(0, len(self.states) - 1):
            raise ValueError("need one delta per consecutive pair")
