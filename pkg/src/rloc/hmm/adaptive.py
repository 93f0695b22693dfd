"""DA-HMM: time-decayed transitions and Jaccard-smoothed emissions on top of a static HMM."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import FormatError
from .labels import LabeledSequence
from .observation import P_FLOOR, Observation
from .static import StaticHmm, clamp_prob

log = logging.getLogger(__name__)

FORMAT = "rloc.dahmm"
VERSION = 1


@dataclass(frozen=True)
class DecayFit:
    alpha: float
    beta: float
    fallback: bool = False
    n_bins: int = 0
    iterations: int = 0


def delta_bin(delta_s: float) -> int:
    """Integer-second bin, halves rounded up."""
    return int(math.floor(delta_s + 0.5))


def gauss_newton_exp_decay(deltas: Sequence[float], targets: Sequence[float], a_static: float,
                           max_iter: int = 100, tol: float = 1e-9) -> DecayFit:
    """Least-squares fit of ``exp(-alpha*d) * beta * a_static`` to ``targets``.

    Starts from a log-linear fit over the positive targets, then takes
    Gauss-Newton steps (halved while they fail to reduce the residual) until
    the step norm drops below ``tol``.
    """
    d = np.asarray(deltas, dtype=float)
    t = np.asarray(targets, dtype=float)
    pos = t > 0
    if len(np.unique(d[pos])) >= 2:
        slope, icept = np.polyfit(d[pos], np.log(t[pos]), 1)
        alpha, beta = -slope, math.exp(icept) / a_static
    else:
        alpha, beta = 0.0, max(float(t.mean()), P_FLOOR) / a_static

    def sse(al, be):
        r = np.exp(-al * d) * be * a_static - t
        return float(r @ r)

    cur = sse(alpha, beta)
    it = 0
    for it in range(1, max_iter + 1):
        y = np.exp(-alpha * d) * beta * a_static
        jac = np.column_stack([-d * y, y / beta])
        step, *_ = np.linalg.lstsq(jac, t - y, rcond=None)
        scale = 1.0
        while True:
            na, nb = alpha + scale * step[0], beta + scale * step[1]
            new = sse(na, nb) if nb > 0 else math.inf
            if new <= cur or scale < 1e-6:
                break
            scale *= 0.5
        if not math.isfinite(new) or nb <= 0:
            break
        alpha, beta, cur = na, nb, new
        if math.hypot(*(scale * step)) < tol:
            break
    return DecayFit(float(alpha), float(beta), False, len(d), it)


def transition_statistics(sequences: Sequence[LabeledSequence]) -> dict:
    """state i -> {delta bin -> [U_i0, U_i1]} pooled over every sequence."""
    stats = {0: {}, 1: {}}
    for s in sequences:
        for t, delta in enumerate(s.deltas):
            i, j = s.states[t], s.states[t + 1]
            stats[i].setdefault(delta_bin(delta), [0, 0])[j] += 1
    return stats


def fit_adaptive_transition(sequences: Sequence[LabeledSequence], static: StaticHmm) -> tuple:
    """One :class:`DecayFit` per from-state; unusable states fall back to (0, 1), flagged."""
    stats = transition_statistics(sequences)
    fits = []
    for i in (0, 1):
        bins = sorted(stats[i])
        a1 = static.a1[i]
        if len(bins) < 2 or a1 <= 0.0:
            log.warning("state %d: %d delta bins, a_i1=%g; using the static transition", i, len(bins), a1)
            fits.append(DecayFit(0.0, 1.0, True, len(bins), 0))
            continue
        target = [stats[i][b][1] / (stats[i][b][0] + stats[i][b][1]) for b in bins]
        fit = gauss_newton_exp_decay(bins, target, a1)
        if not (math.isfinite(fit.alpha) and math.isfinite(fit.beta) and fit.beta > 0):
            log.warning("state %d: decay fit diverged; using the static transition", i)
            fit = DecayFit(0.0, 1.0, True, len(bins), fit.iterations)
        fits.append(fit)
    return tuple(fits)


@dataclass(frozen=True, eq=False)
class DaHmm:
    base: StaticHmm
    alpha: tuple
    beta: tuple
    gamma: float
    epsilon: float
    fallback: tuple = (False, False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def ss_match(self) -> str:
        return self.base.ss_match

    def transition_row(self, i: int, delta_s: float) -> tuple:
        scale = self.beta[i] * self.base.a1[i]
        x = -self.alpha[i] * delta_s
        # a negative rate can push exp past the float range; the clamp caps it anyway
        a1 = clamp_prob(math.exp(x) * scale if x < 700.0 else (math.inf if scale > 0 else 0.0))
        return 1.0 - a1, a1

    def log_initial(self) -> np.ndarray:
        return self.base.log_initial()

    def log_transitions(self, deltas: Sequence[float]) -> np.ndarray:
        out = np.empty((len(deltas), 2, 2))
        for t, d in enumerate(deltas):
            out[t] = np.log([self.transition_row(0, d), self.transition_row(1, d)])
        return out

    def emission(self, v: Observation, j: int) -> float:
        key = (v, j)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        idx = self.base.index
        if idx.sample_size(v.bs) >= self.gamma:
            p = idx.exact_estimate(v, j)
        else:
            p = idx.weighted_estimate(v, j, self.epsilon)
            if p is None:
                p = P_FLOOR
        p = max(p, P_FLOOR)
        self._cache[key] = p
        return p

    def log_emissions(self, observations: Sequence[Observation]) -> np.ndarray:
        return np.log(np.array([[self.emission(v, 0), self.emission(v, 1)] for v in observations],
                               dtype=float).reshape(-1, 2))

    def to_dict(self) -> dict:
        return {"format": FORMAT, "version": VERSION, "base": self.base.to_dict(),
                "alpha": list(self.alpha), "beta": list(self.beta), "gamma": self.gamma,
                "epsilon": self.epsilon, "fallback": list(self.fallback)}

    @classmethod
    def from_dict(cls, d: dict) -> "DaHmm":
        if d.get("format") != FORMAT or d.get("version") != VERSION:
            raise FormatError(f"not a {FORMAT} v{VERSION} document")
        return cls(StaticHmm.from_dict(d["base"]), tuple(d["alpha"]), tuple(d["beta"]),
                   d["gamma"], d["epsilon"], tuple(d["fallback"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "DaHmm":
        return cls.from_dict(json.loads(Path(path).read_text()))


def adaptive_transition(model: DaHmm, i: int, j: int, delta_s: float) -> float:
    return model.transition_row(i, delta_s)[j]


def adaptive_emission(model: DaHmm, v: Observation, j: int) -> float:
    return model.emission(v, j)


def estimate_da_hmm(static: StaticHmm, sequences: Sequence[LabeledSequence], gamma: float = 5,
                    epsilon: float = 0.5, fits: Optional[tuple] = None) -> DaHmm:
    fits = fit_adaptive_transition(sequences, static) if fits is None else fits
    return DaHmm(static, tuple(f.alpha for f in fits), tuple(f.beta for f in fits), gamma, epsilon,
                 tuple(f.fallback for f in fits))
