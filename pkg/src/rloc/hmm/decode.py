"""Most-likely confidence paths: Viterbi and an exhaustive oracle with the same tie rules."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .. import kernels
from ..errors import OracleRefused

BRUTE_FORCE_LIMIT = 20


@dataclass(frozen=True)
class Decoded:
    states: np.ndarray
    log_prob: float


def _arrays(model, observations, deltas):
    if len(observations) == 0:
        raise ValueError("cannot decode an empty sequence")
    if len(deltas) != len(observations) - 1:
        raise ValueError("need one delta per consecutive pair")
    return (np.ascontiguousarray(model.log_initial(), dtype=float),
            np.ascontiguousarray(model.log_transitions(deltas), dtype=float).reshape(-1, 2, 2),
            np.ascontiguousarray(model.log_emissions(observations), dtype=float))


def viterbi_decode(model, observations: Sequence, deltas: Sequence[float]) -> Decoded:
    """Works with any model exposing log_initial / log_transitions / log_emissions."""
    path, logp = kernels.viterbi2(*_arrays(model, observations, deltas))
    return Decoded(np.asarray(path, dtype=np.int64), float(logp))


def path_log_prob(log_pi, log_a, log_b, path) -> float:
    lp = log_pi[path[0]] + log_b[0][path[0]]
    for t in range(1, len(path)):
        lp = lp + log_a[t - 1][path[t - 1]][path[t]] + log_b[t][path[t]]
    return float(lp)


def brute_force_decode(model, observations: Sequence, deltas: Sequence[float]) -> Decoded:
    """Exhaustive search; ties prefer state 1 at the latest differing step."""
    if len(observations) > BRUTE_FORCE_LIMIT:
        raise OracleRefused(f"{len(observations)} steps exceeds the {BRUTE_FORCE_LIMIT}-step oracle limit")
    log_pi, log_a, log_b = _arrays(model, observations, deltas)
    best_key, best_path = None, None
    for path in itertools.product((0, 1), repeat=len(observations)):
        key = (path_log_prob(log_pi, log_a, log_b, path), path[::-1])
        if best_key is None or key > best_key:
            best_key, best_path = key, path
    return Decoded(np.array(best_path, dtype=np.int64), best_key[0])
