"""Static two-state HMM estimated by counting over labeled confidence-training sequences."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DegenerateTrainingError, TrainingError
from .labels import LabeledSequence
from .observation import P_FLOOR, EmissionIndex, Observation


def clamp_prob(p: float) -> float:
    return min(max(p, P_FLOOR), 1.0 - P_FLOOR)


def transition_row(a1: float) -> tuple:
    """(a_{i,0}, a_{i,1}) with a_{i,1} clamped and a_{i,0} its complement."""
    a1 = clamp_prob(a1)
    return 1.0 - a1, a1


@dataclass(frozen=True, eq=False)
class StaticHmm:
    """pi and transition counts plus the emission index over the same samples."""

    initial_counts: np.ndarray  # (2,)
    transition_counts: np.ndarray  # (2, 2), rows = from-state
    index: EmissionIndex = field(repr=False)
    ss_match: str = "serving"

    def __post_init__(self):
        for j in (0, 1):
            if self.index.n_state[j] == 0:
                raise DegenerateTrainingError(f"state {j} never observed in confidence training data")
        rows = self.transition_counts.sum(axis=1)
        # a state seen only at sequence ends has no outgoing counts; use its marginal
        marginal = self.index.n_state[1] / self.index.n_state.sum()
        a1 = np.where(rows > 0, self.transition_counts[:, 1] / np.maximum(rows, 1), marginal)
        object.__setattr__(self, "_a1", tuple(float(x) for x in a1))

    @property
    def pi(self) -> np.ndarray:
        return self.initial_counts / self.initial_counts.sum()

    @property
    def a(self) -> np.ndarray:
        """Raw count-ratio transition matrix (unclamped)."""
        return np.array([[1.0 - self._a1[0], self._a1[0]], [1.0 - self._a1[1], self._a1[1]]])

    @property
    def a1(self) -> tuple:
        return self._a1

    def log_initial(self) -> np.ndarray:
        return np.log(np.maximum(self.pi, P_FLOOR))

    def log_transition(self) -> np.ndarray:
        return np.log(np.array([transition_row(self._a1[0]), transition_row(self._a1[1])]))

    def log_transitions(self, deltas: Sequence[float]) -> np.ndarray:
        return np.ascontiguousarray(np.broadcast_to(self.log_transition(), (len(deltas), 2, 2)))

    def emission(self, v: Observation, j: int) -> float:
        return max(self.index.exact_estimate(v, j), P_FLOOR)

    def log_emissions(self, observations: Sequence[Observation]) -> np.ndarray:
        return np.log(np.array([[self.emission(v, 0), self.emission(v, 1)] for v in observations],
                               dtype=float).reshape(-1, 2))

    def to_dict(self) -> dict:
        return {"initial_counts": self.initial_counts.tolist(),
                "transition_counts": self.transition_counts.tolist(),
                "ss_match": self.ss_match, "index": self.index.to_list()}

    @classmethod
    def from_dict(cls, d: dict) -> "StaticHmm":
        return cls(np.array(d["initial_counts"], dtype=np.int64),
                   np.array(d["transition_counts"], dtype=np.int64),
                   EmissionIndex.from_list(d["index"]), d["ss_match"])


def train_static_hmm(sequences: Sequence[LabeledSequence], ss_match: str = "serving") -> StaticHmm:
    if not any(len(s.states) >= 2 for s in sequences):
        raise TrainingError("static HMM needs at least one sequence of length >= 2")
    init = np.zeros(2, dtype=np.int64)
    trans = np.zeros((2, 2), dtype=np.int64)
    obs, states = [], []
    for s in sequences:
        if not s.states:
            continue
        init[s.states[0]] += 1
        for i, j in zip(s.states[:-1], s.states[1:]):
            trans[i, j] += 1
        obs.extend(s.observations)
        states.extend(s.states)
    return StaticHmm(init, trans, EmissionIndex(obs, states), ss_match)
