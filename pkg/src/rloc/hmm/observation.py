"""HMM observations and the training-set index behind emission estimates.

An observation is the station set of a sample plus a signal key. The signal
key depends on ``ss_match``:

* ``"multiset"`` - sorted tuple of every discretized level in the sample
* ``"serving"``  - discretized level of the serving station only
* ``"none"``     - signal ignored (every sample matches)

``D_C(bs)`` is the set of training samples whose station set contains ``bs``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .. import kernels
from ..errors import DegenerateTrainingError
from ..mr import MrSample

P_FLOOR = 1e-6


@dataclass(frozen=True)
class Observation:
    bs: frozenset
    ss: object = None


def ss_key(sample: MrSample, mode: str):
    if mode == "multiset":
        return tuple(sorted(c.level for c in sample.cells))
    if mode == "serving":
        return sample.cells[0].level
    return None


def observation_of(sample: MrSample, ss_match: str = "serving") -> Observation:
    return Observation(sample.bs_set, ss_key(sample, ss_match))


def jaccard(a: frozenset, b: frozenset) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


class EmissionIndex:
    """Counts over the confidence-training samples, keyed by distinct station set."""

    def __init__(self, observations: Sequence[Observation], states: Sequence[int]):
        if len(observations) != len(states):
            raise ValueError("observations and states must align")
        self.observations = tuple(observations)
        self.states = np.asarray(states, dtype=np.int8)
        self.n_state = np.bincount(self.states, minlength=2).astype(np.int64)
        self._ss_code = {}
        codes = [self._code(o.ss) for o in self.observations]

        stations = sorted({st for o in self.observations for st in o.bs})
        self.station_bit = {st: i for i, st in enumerate(stations)}
        self.n_words = max(1, math.ceil(len(stations) / 64))

        exact = {}
        for o, s, c in zip(self.observations, self.states.tolist(), codes):
            exact.setdefault(o.bs, Counter())[(s, c)] += 1
        self.sets = tuple(sorted(exact, key=lambda s: tuple(sorted(s))))
        self.exact_counts = [exact[s] for s in self.sets]
        self.exact_n = np.array([sum(c.values()) for c in self.exact_counts], dtype=np.int64)
        self.bits = np.zeros((len(self.sets), self.n_words), dtype=np.uint64)
        for d, s in enumerate(self.sets):
            self.bits[d] = self._bits_of(s)
        self.sizes = np.array([len(s) for s in self.sets], dtype=np.int64)

        # containment statistics of every indexed set, used as z and numerators
        self.z = np.zeros(len(self.sets), dtype=np.int64)
        self.set_counts = []
        for d in range(len(self.sets)):
            sup = self._supersets_of_bits(self.bits[d])
            self.z[d] = self.exact_n[sup].sum()
            self.set_counts.append(self._merge(sup))

    def _code(self, ss) -> int:
        return self._ss_code.setdefault(ss, len(self._ss_code))

    def _bits_of(self, bs: Iterable) -> np.ndarray:
        out = np.zeros(self.n_words, dtype=np.uint64)
        for st in bs:
            b = self.station_bit.get(st)
            if b is not None:
                out[b // 64] |= np.uint64(1) << np.uint64(b % 64)
        return out

    def _supersets_of_bits(self, q: np.ndarray) -> np.ndarray:
        return np.nonzero(((self.bits & q[None, :]) == q[None, :]).all(axis=1))[0]

    def _merge(self, sup: np.ndarray) -> Counter:
        if len(sup) == 1:
            return self.exact_counts[int(sup[0])]
        out = Counter()
        for e in sup.tolist():
            out.update(self.exact_counts[e])
        return out

    def supersets(self, bs: frozenset) -> np.ndarray:
        """Indices of indexed sets containing ``bs``."""
        if any(st not in self.station_bit for st in bs):
            return np.zeros(0, dtype=np.int64)
        return self._supersets_of_bits(self._bits_of(bs))

    def sample_size(self, bs: frozenset) -> int:
        """z = |D_C(bs)|."""
        return int(self.exact_n[self.supersets(bs)].sum())

    def _state_total(self, j: int) -> int:
        n = int(self.n_state[j])
        if n == 0:
            raise DegenerateTrainingError(f"no training samples in state {j}")
        return n

    def exact_estimate(self, v: Observation, j: int) -> float:
        """|D_C(v.bs) & D_C(v.ss) & D_C(s_j)| / |D_C(s_j)|."""
        n = self._state_total(j)
        code = self._ss_code.get(v.ss)
        if code is None:
            return 0.0
        hits = sum(self.exact_counts[e].get((j, code), 0) for e in self.supersets(v.bs).tolist())
        return hits / n

    def similar_sets(self, bs: frozenset, epsilon: float):
        """Indexed station sets with Jaccard >= epsilon, and their smoothing weights."""
        idx, jac = kernels.jaccard_scan(self.bits, self.sizes, self._bits_of(bs), len(bs), float(epsilon))
        if len(idx) == 0:
            return idx, jac, np.zeros(0)
        raw = np.log10(1.0 + self.z[idx]) * jac
        return idx, jac, raw / raw.sum()

    def weighted_estimate(self, v: Observation, j: int, epsilon: float) -> Optional[float]:
        """Jaccard-smoothed estimate; ``None`` when no indexed set is similar enough."""
        n = self._state_total(j)
        idx, _, w = self.similar_sets(v.bs, epsilon)
        if len(idx) == 0:
            return None
        code = self._ss_code.get(v.ss)
        if code is None:
            return 0.0
        total = 0.0
        for d, wd in zip(idx.tolist(), w.tolist()):
            total += wd * (self.set_counts[d].get((j, code), 0) / n)
        return total

    def to_list(self) -> list:
        out = []
        for o, s in zip(self.observations, self.states.tolist()):
            ss = list(o.ss) if isinstance(o.ss, tuple) else o.ss
            out.append([sorted([list(st) for st in o.bs]), ss, s])
        return out

    @classmethod
    def from_list(cls, rows: list) -> "EmissionIndex":
        obs, states = [], []
        for bs, ss, s in rows:
            obs.append(Observation(frozenset(tuple(st) for st in bs), tuple(ss) if isinstance(ss, list) else ss))
            states.append(s)
        return cls(obs, states)
