"""Sequence repair: split flawed samples into runs and replace each run by its best path."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..grid import GridCellId
from ..mr import MrSample
from .graph import build_repair_graph, dp_max_joint_path
from .profiles import ProfileTable, select_candidates, vertex_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RepairedEntry:
    original: Optional[GridCellId]
    state: int
    repaired: Optional[GridCellId]
    position: Optional[tuple]
    run_id: int = -1
    flag: Optional[str] = None


@dataclass(frozen=True)
class RepairedTrajectory:
    entries: tuple
    candidates: dict  # sample index -> tuple of candidate grids (flawed samples only)

    def __len__(self):
        return len(self.entries)


def flawed_runs(states: Sequence[int]) -> list:
    """Maximal runs of consecutive state-0 positions as (start, stop) half-open ranges."""
    runs, start = [], None
    for i, s in enumerate(states):
        if s == 0 and start is None:
            start = i
        elif s != 0 and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(states)))
    return runs


def repair_sequence(samples: Sequence[MrSample], predictions: Sequence[Optional[GridCellId]],
                    states: Sequence[int], profiles: ProfileTable, xi: float = 0.7, k_max: int = 15,
                    d_scale: float = 500.0, c_floor: float = 0.05) -> RepairedTrajectory:
    """Repair every flawed run of one sequence; normal entries pass through untouched."""
    if not (len(samples) == len(predictions) == len(states)):
        raise ValueError("samples, predictions and states must align")
    grid = profiles.grid
    n = len(states)
    repaired = list(predictions)
    run_of = [-1] * n
    flags = [None] * n
    cands = {}

    def anchor_xy(i):
        return grid.centroid_xy(predictions[i])

    normal = [i for i in range(n) if states[i] != 0 and predictions[i] is not None]
    normal_set = set(normal)

    for run_id, (a, b) in enumerate(flawed_runs(states)):
        level_info = {}
        for i in range(a, b):
            run_of[i] = run_id
            chosen = select_candidates(samples[i], profiles, xi, k_max)
            kept, w, flag = vertex_weights(samples[i], chosen, profiles, d_scale)
            cands[i] = tuple(p.grid for p in kept)
            if flag is not None:
                flags[i] = flag
            if kept:
                level_info[i] = (kept, w)
        # samples without candidates split the run into independent sub-runs
        sub, cur = [], []
        for i in range(a, b):
            if i in level_info:
                cur.append(i)
            elif cur:
                sub.append(cur)
                cur = []
        if cur:
            sub.append(cur)
        for part in sub:
            lo, hi = part[0], part[-1]
            src = max((j for j in normal if j < lo), default=None)
            snk = min((j for j in normal if j > hi), default=None)
            source = None if src is None else (predictions[src], anchor_xy(src))
            sink = None if snk is None else (predictions[snk], anchor_xy(snk))
            before = None
            if src is not None and src - 1 in normal_set:
                before = anchor_xy(src - 1)
            try:
                graph = build_repair_graph(
                    [[p.grid for p in level_info[i][0]] for i in part],
                    [level_info[i][1] for i in part],
                    [np.array([grid.centroid_xy(p.grid) for p in level_info[i][0]]) for i in part],
                    source, sink, before, grid.cell_size_m / 2.0, c_floor)
                res = dp_max_joint_path(graph)
            except (ValueError, FloatingPointError) as exc:
                log.warning("run %d left unrepaired: %s", run_id, exc)
                for i in part:
                    flags[i] = "repair_failed"
                continue
            for lvl, i in zip(graph.flawed_levels, part):
                repaired[i] = graph.levels[lvl][res.indices[lvl]]

    entries = tuple(
        RepairedEntry(predictions[i], int(states[i]), repaired[i],
                      None if repaired[i] is None else grid.centroid(repaired[i]), run_of[i], flags[i])
        for i in range(n))
    return RepairedTrajectory(entries, cands)
