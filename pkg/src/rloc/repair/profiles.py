"""Per-grid station profiles and the candidate/vertex scoring built on them."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from ..grid import GridCellId, GridSystem
from ..mr import MrSample

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridProfile:
    grid: GridCellId
    bs_all: frozenset
    bs_serving: frozenset
    n_samples: int


def _lonlat(entry) -> tuple:
    if hasattr(entry, "lon"):
        return (entry.lon, entry.lat)
    return tuple(entry)


@dataclass(frozen=True, eq=False)
class ProfileTable:
    """Profiles sorted by grid id, plus station positions projected to meters."""

    grid: GridSystem
    profiles: tuple
    station_xy: Mapping = field(repr=False)
    missing_stations: frozenset = frozenset()

    def __post_init__(self):
        by_grid = {p.grid: i for i, p in enumerate(self.profiles)}
        by_station = defaultdict(list)
        by_serving = defaultdict(list)
        for i, p in enumerate(self.profiles):
            for st in p.bs_all:
                by_station[st].append(i)
            for st in p.bs_serving:
                by_serving[st].append(i)
        n = np.array([p.n_samples for p in self.profiles], dtype=float)
        post = np.empty(len(self.profiles))
        for i, p in enumerate(self.profiles):
            rivals = set()
            for st in p.bs_serving:
                rivals.update(by_serving[st])
            post[i] = n[i] / n[sorted(rivals)].sum() if rivals else 1.0
        object.__setattr__(self, "_by_grid", by_grid)
        object.__setattr__(self, "_by_station", dict(by_station))
        object.__setattr__(self, "_posterior", post)

    def __len__(self):
        return len(self.profiles)

    def get(self, g: GridCellId) -> Optional[GridProfile]:
        i = self._by_grid.get(g)
        return None if i is None else self.profiles[i]

    def posterior(self, g: GridCellId) -> float:
        return float(self._posterior[self._by_grid[g]])

    def overlapping(self, bs: Iterable) -> dict:
        """profile index -> |bs & BS_g| for every profile sharing a station with ``bs``."""
        hits = defaultdict(int)
        for st in bs:
            for i in self._by_station.get(st, ()):
                hits[i] += 1
        return hits


def build_grid_profiles(samples: Iterable[MrSample], grid: GridSystem, bs_db: Mapping) -> ProfileTable:
    """One profile per grid cell containing at least one sample's truth."""
    acc = {}
    missing = set()
    for s in samples:
        if s.truth is None:
            continue
        g = grid.grid_of(*s.truth)
        entry = acc.setdefault(g, [set(), set(), 0])
        entry[0].update(s.bs_set)
        entry[1].add(s.serving)
        entry[2] += 1
        missing.update(st for st in s.bs_set if st not in bs_db)
    if missing:
        log.warning("%d stations missing from the station table; excluded from distances", len(missing))
    profiles = tuple(GridProfile(g, frozenset(a), frozenset(b), n) for g, (a, b, n) in sorted(acc.items()))
    xy = {st: grid.projection.to_xy(*_lonlat(v)) for st, v in bs_db.items()}
    return ProfileTable(grid, profiles, xy, frozenset(missing))


def grid_posterior(profile: GridProfile, profiles: ProfileTable) -> float:
    """n(g) over the total n of all grids sharing any serving station with g."""
    return profiles.posterior(profile.grid)


def candidate_similarity(bs_r: frozenset, profile: GridProfile) -> float:
    """J' = |bs_r & BS_g| / |bs_r|."""
    if not bs_r:
        raise ValueError("empty station set")
    return len(bs_r & profile.bs_all) / len(bs_r)


def select_candidates(sample: MrSample, profiles: ProfileTable, xi: float, k_max: int) -> list:
    """Profiles with J' >= xi, best first: higher J', more samples, then grid id."""
    bs = sample.bs_set
    ranked = []
    for i, inter in profiles.overlapping(bs).items():
        j = inter / len(bs)
        if j >= xi:
            p = profiles.profiles[i]
            ranked.append((-j, -p.n_samples, p.grid, p))
    ranked.sort(key=lambda r: r[:3])
    return [r[3] for r in ranked[:k_max]]


def serving_distance(sample: MrSample, profile: GridProfile, profiles: ProfileTable) -> Optional[float]:
    """Mean distance from the sample's serving station to the grid's serving stations.

    Zero when the serving station is itself one of them; ``None`` when no
    distance can be formed (no known serving positions).
    """
    srv = sample.serving
    if srv in profile.bs_serving:
        return 0.0
    origin = profiles.station_xy.get(srv)
    pts = [profiles.station_xy[st] for st in sorted(profile.bs_serving) if st in profiles.station_xy]
    if origin is None or not pts:
        return None
    return float(np.mean([math.hypot(x - origin[0], y - origin[1]) for x, y in pts]))


def vertex_weights(sample: MrSample, candidates: Sequence[GridProfile], profiles: ProfileTable,
                   d_scale: float = 500.0) -> tuple:
    """Normalized J'·P·exp(-D/d_scale) over the usable candidates.

    Returns (kept candidates, weights, flag). Candidates without a defined
    distance are dropped; an all-zero level falls back to uniform weights.
    """
    kept, raw = [], []
    bs = sample.bs_set
    for p in candidates:
        d = serving_distance(sample, p, profiles)
        if d is None:
            continue
        kept.append(p)
        raw.append(candidate_similarity(bs, p) * profiles.posterior(p.grid) * math.exp(-d / d_scale))
    if not kept:
        return [], np.zeros(0), "no_candidates"
    w = np.array(raw)
    total = w.sum()
    if not total > 0:
        return kept, np.full(len(kept), 1.0 / len(kept)), "uniform_weights"
    return kept, w / total, None
