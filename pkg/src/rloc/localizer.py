"""Grid-cell localization models.

Any object with ``predict(sample) -> PredictedLocation`` can drive detection
and repair; :class:`FingerprintModel` is the shipped KNN-fingerprint baseline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Protocol, Sequence

import numpy as np

from . import kernels
from .errors import FormatError, NoCoverageError, TrainingError
from .grid import GridCellId, GridSystem
from .mr import MrSample, MrSequence, NO_SIGNAL_LEVEL

FORMAT = "rloc.fingerprint"
VERSION = 1
CORE_FRACTION = 0.5


@dataclass(frozen=True)
class PredictedLocation:
    grid: GridCellId
    position: tuple  # (lon, lat) centroid of grid
    scores: dict = field(repr=False)


class LocalizationModel(Protocol):
    grid: GridSystem

    def predict(self, sample: MrSample) -> PredictedLocation: ...


def fine_level(rssi_dbm: Optional[float]) -> float:
    """RSSI on the 8-level scale without flooring (1 at -50 dBm, +1 per 10 dB)."""
    if rssi_dbm is None:
        return float(NO_SIGNAL_LEVEL)
    return 1.0 + (-50.0 - rssi_dbm) / 10.0


@dataclass(frozen=True, eq=False)
class FingerprintModel:
    """Per-grid table of mean signal level and sighting count for each station."""

    grid: GridSystem
    k: int
    missing_penalty: float
    stations: tuple
    cells: tuple
    level_sum: np.ndarray = field(repr=False)
    count: np.ndarray = field(repr=False)
    n_samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        station_index = {s: i for i, s in enumerate(self.stations)}
        with np.errstate(invalid="ignore", divide="ignore"):
            mean = np.where(self.count > 0, self.level_sum / np.maximum(self.count, 1), 0.0)
        present = (self.count > 0).astype(np.uint8)
        core = (self.count >= CORE_FRACTION * self.n_samples[:, None]).astype(np.uint8) & present
        best = {}
        for si, s in enumerate(self.stations):
            rows = np.nonzero(present[:, si])[0]
            if len(rows):
                # lowest level is strongest; stable argmin keeps lexicographic cell order on ties
                best[s] = int(rows[np.argmin(mean[rows, si])])
        object.__setattr__(self, "_station_index", station_index)
        object.__setattr__(self, "_mean", np.ascontiguousarray(mean))
        object.__setattr__(self, "_present", np.ascontiguousarray(present))
        object.__setattr__(self, "_core", np.ascontiguousarray(core))
        object.__setattr__(self, "_core_count", core.sum(axis=1).astype(np.int32))
        object.__setattr__(self, "_serving_best", best)

    def _location(self, ranked: Sequence[int], sims: np.ndarray) -> PredictedLocation:
        shifted = sims - sims.min() + 1.0
        total = shifted.sum()
        scores = {self.cells[g]: float(v / total) for g, v in zip(ranked, shifted)}
        top = self.cells[ranked[0]]
        return PredictedLocation(top, self.grid.centroid(top), scores)

    def predict(self, sample: MrSample) -> PredictedLocation:
        idx, lvl, unknown = [], [], 0
        for c in sample.cells:
            st = c.station
            if st is None:
                continue
            si = self._station_index.get(st)
            if si is None:
                unknown += 1
            else:
                idx.append(si)
                lvl.append(fine_level(c.rssi_dbm))
        if idx:
            sim, shared = kernels.fingerprint_scores(
                self._mean, self._present, self._core, self._core_count,
                np.array(idx, dtype=np.int64), np.array(lvl, dtype=np.float64),
                unknown, float(self.missing_penalty))
            elig = np.nonzero(shared > 0)[0]
            if len(elig):
                order = elig[np.argsort(-sim[elig], kind="stable")][: self.k]
                return self._location(order, sim[order])
        g = self._serving_best.get(sample.serving)
        if g is None:
            raise NoCoverageError(f"serving station {sample.serving} never seen in training")
        return self._location([g], np.array([0.0]))

    # ------------------------------------------------------------ persistence

    def to_dict(self) -> dict:
        cells = []
        for g, cell in enumerate(self.cells):
            cols = np.nonzero(self.count[g])[0]
            cells.append([cell.col, cell.row, int(self.n_samples[g]),
                          [[int(s), float(self.level_sum[g, s]), int(self.count[g, s])] for s in cols]])
        return {"format": FORMAT, "version": VERSION, "grid": self.grid.to_dict(), "k": self.k,
                "missing_penalty": self.missing_penalty,
                "stations": [list(s) for s in self.stations], "cells": cells}

    @classmethod
    def from_dict(cls, d: dict) -> "FingerprintModel":
        if d.get("format") != FORMAT or d.get("version") != VERSION:
            raise FormatError(f"not a {FORMAT} v{VERSION} document")
        stations = tuple(tuple(s) for s in d["stations"])
        G, S = len(d["cells"]), len(stations)
        level_sum = np.zeros((G, S))
        count = np.zeros((G, S), dtype=np.int64)
        n = np.zeros(G, dtype=np.int64)
        cells = []
        for g, (col, row, ns, entries) in enumerate(d["cells"]):
            cells.append(GridCellId(col, row))
            n[g] = ns
            for s, total, c in entries:
                level_sum[g, s] = total
                count[g, s] = c
        return cls(GridSystem.from_dict(d["grid"]), d["k"], d["missing_penalty"], stations,
                   tuple(cells), level_sum, count, n)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "FingerprintModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def train_fingerprint(d_l: Iterable[MrSample], grid: GridSystem, k: int = 5,
                      missing_penalty: float = 2.0) -> FingerprintModel:
    per_cell = {}
    stations = set()
    for s in d_l:
        if s.truth is None:
            raise TrainingError("training sample without ground truth")
        cell = grid.grid_of(*s.truth)
        entry = per_cell.setdefault(cell, [0, {}])
        entry[0] += 1
        for c in s.cells:
            st = c.station
            if st is None:
                continue
            stations.add(st)
            acc = entry[1].setdefault(st, [0.0, 0])
            acc[0] += fine_level(c.rssi_dbm)
            acc[1] += 1
    if not per_cell:
        raise TrainingError("empty localization training set")
    st_sorted = tuple(sorted(stations))
    st_index = {s: i for i, s in enumerate(st_sorted)}
    cells = tuple(sorted(per_cell))
    level_sum = np.zeros((len(cells), len(st_sorted)))
    count = np.zeros((len(cells), len(st_sorted)), dtype=np.int64)
    n = np.zeros(len(cells), dtype=np.int64)
    for g, cell in enumerate(cells):
        n[g], table = per_cell[cell]
        for st, (total, c) in table.items():
            level_sum[g, st_index[st]] = total
            count[g, st_index[st]] = c
    return FingerprintModel(grid, int(k), float(missing_penalty), st_sorted, cells, level_sum, count, n)


def predict(model: LocalizationModel, sample: MrSample) -> PredictedLocation:
    return model.predict(sample)


def batch_predict(model: LocalizationModel, sequence: MrSequence | Sequence[MrSample]) -> list:
    """Element-wise prediction; a failed element is returned as its exception instance."""
    samples = sequence.samples if isinstance(sequence, MrSequence) else sequence
    out = []
    for s in samples:
        try:
            out.append(model.predict(s))
        except NoCoverageError as exc:
            out.append(exc)
    return out
