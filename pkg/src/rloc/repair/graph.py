"""Leveled repair graph, max-product DP over it, and an exhaustive oracle."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .. import kernels
from ..errors import OracleRefused

C_FLOOR = 0.05
ENUMERATION_LIMIT = 100_000


def edge_weight(prev_pos: Optional[tuple], from_pos: tuple, to_pos: tuple, min_dist: float,
                c_floor: float = C_FLOOR) -> float:
    """Direction-and-distance weight of a move, all positions planar (x, y) meters.

    The angular factor is ``(1 + cos θ)/2 + c_floor`` with θ between prev→from
    and from→to; it is 1 when either vector is undefined.
    """
    ux, uy = to_pos[0] - from_pos[0], to_pos[1] - from_pos[1]
    d = math.hypot(ux, uy)
    ang = 1.0
    if prev_pos is not None:
        vx, vy = from_pos[0] - prev_pos[0], from_pos[1] - prev_pos[1]
        nv = math.hypot(vx, vy)
        if nv > 0 and d > 0:
            cos = max(-1.0, min(1.0, (vx * ux + vy * uy) / (nv * d)))
            ang = (1.0 + cos) / 2.0 + c_floor
    return ang / max(d, min_dist)


def edge_weight_matrix(prev_pos: Optional[tuple], from_xy: np.ndarray, to_xy: np.ndarray,
                       min_dist: float, c_floor: float = C_FLOOR) -> np.ndarray:
    """Vectorized :func:`edge_weight` for every (from, to) pair."""
    u = to_xy[None, :, :] - from_xy[:, None, :]
    d = np.hypot(u[..., 0], u[..., 1])
    ang = np.ones_like(d)
    if prev_pos is not None:
        v = from_xy - np.asarray(prev_pos, dtype=float)[None, :]
        nv = np.hypot(v[:, 0], v[:, 1])
        ok = (nv[:, None] > 0) & (d > 0)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = (v[:, None, 0] * u[..., 0] + v[:, None, 1] * u[..., 1]) / (nv[:, None] * d)
        cos = np.clip(np.where(ok, cos, 0.0), -1.0, 1.0)
        ang = np.where(ok, (1.0 + cos) / 2.0 + c_floor, 1.0)
    return ang / np.maximum(d, min_dist)


@dataclass(frozen=True)
class RepairGraph:
    """Levels of vertices (grid ids) with per-vertex and per-edge weights.

    ``vertex_weights[t]`` has one entry per vertex of level t and
    ``edge_weights[t]`` is the ``len(level t) x len(level t+1)`` matrix.
    Anchor levels, when present, hold a single vertex of weight 1.
    """

    levels: tuple
    vertex_weights: tuple
    edge_weights: tuple
    has_source: bool = False
    has_sink: bool = False

    def __post_init__(self):
        if not self.levels or any(len(l) == 0 for l in self.levels):
            raise ValueError("every level needs at least one vertex")
        if len(self.vertex_weights) != len(self.levels) or len(self.edge_weights) != len(self.levels) - 1:
            raise ValueError("weights do not match levels")
        for t, e in enumerate(self.edge_weights):
            if e.shape != (len(self.levels[t]), len(self.levels[t + 1])):
                raise ValueError(f"edge block {t} has shape {e.shape}")

    @property
    def n_paths(self) -> int:
        return math.prod(len(l) for l in self.levels)

    @property
    def flawed_levels(self) -> range:
        return range(1 if self.has_source else 0, len(self.levels) - (1 if self.has_sink else 0))

    def flat(self):
        """Kernel layout: log weights flattened with level and edge offsets."""
        sizes = [len(l) for l in self.levels]
        level_off = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        vlog = np.log(np.concatenate([np.asarray(w, dtype=float) for w in self.vertex_weights]))
        blocks = [np.asarray(e, dtype=float).ravel() for e in self.edge_weights]
        edge_off = np.concatenate([[0], np.cumsum([len(b) for b in blocks])]).astype(np.int64)
        elog = np.log(np.concatenate(blocks)) if blocks else np.zeros(0)
        return vlog, level_off, elog, edge_off


def build_repair_graph(candidates: Sequence[Sequence], weights: Sequence[np.ndarray],
                       positions: Sequence[np.ndarray], source: Optional[tuple] = None,
                       sink: Optional[tuple] = None, before_source: Optional[tuple] = None,
                       min_dist: float = 10.0, c_floor: float = C_FLOOR) -> RepairGraph:
    """Assemble the graph for one run of flawed samples.

    ``candidates[i]``/``weights[i]``/``positions[i]`` describe flawed level i;
    ``source`` and ``sink`` are ``(vertex_id, (x, y))`` anchors or ``None``.
    The angle on the first edge uses ``before_source``; on every later edge
    it uses the source anchor.
    """
    if not candidates:
        raise ValueError("a run needs at least one flawed sample")
    levels, vw, xy = [], [], []
    if source is not None:
        levels.append((source[0],))
        vw.append(np.ones(1))
        xy.append(np.asarray([source[1]], dtype=float))
    for c, w, p in zip(candidates, weights, positions):
        levels.append(tuple(c))
        vw.append(np.asarray(w, dtype=float))
        xy.append(np.asarray(p, dtype=float).reshape(-1, 2))
    if sink is not None:
        levels.append((sink[0],))
        vw.append(np.ones(1))
        xy.append(np.asarray([sink[1]], dtype=float))
    anchor = None if source is None else tuple(source[1])
    edges = []
    for t in range(len(levels) - 1):
        prev = before_source if (source is not None and t == 0) else anchor
        edges.append(edge_weight_matrix(prev, xy[t], xy[t + 1], min_dist, c_floor))
    return RepairGraph(tuple(levels), tuple(vw), tuple(edges), source is not None, sink is not None)


@dataclass(frozen=True)
class PathResult:
    indices: tuple
    log_prob: float
    ops: int = 0


def dp_max_joint_path(graph: RepairGraph) -> PathResult:
    """Max over source-to-sink paths of the product of vertex and edge weights."""
    path, logp, ops = kernels.layered_dp(*graph.flat())
    return PathResult(tuple(int(i) for i in path), float(logp), int(ops))


def enumerate_paths(graph: RepairGraph) -> PathResult:
    """Exhaustive oracle; among equal scores the smallest indices (from the last level back) win."""
    if graph.n_paths > ENUMERATION_LIMIT:
        raise OracleRefused(f"{graph.n_paths} paths exceeds the {ENUMERATION_LIMIT} limit")
    vlog = [np.log(np.asarray(w, dtype=float)) for w in graph.vertex_weights]
    elog = [np.log(np.asarray(e, dtype=float)) for e in graph.edge_weights]
    best_key, best = None, None
    for path in itertools.product(*(range(len(l)) for l in graph.levels)):
        lp = float(vlog[0][path[0]])
        for t in range(1, len(path)):
            lp = lp + elog[t - 1][path[t - 1], path[t]] + vlog[t][path[t]]
        key = (-lp, path[::-1])
        if best_key is None or key < best_key:
            best_key, best = key, path
    return PathResult(tuple(best), -best_key[0], 0)
