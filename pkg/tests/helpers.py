"""Small synthetic worlds shared by the test modules."""

from rloc import sim
from rloc.config import PipelineConfig
from rloc.grid import BBox, build_grid_system
from rloc.mr import CellObservation, MrSample


def small_config(**kw) -> PipelineConfig:
    base = dict(area_width_m=1500.0, area_height_m=1500.0, n_stations=20, n_devices=30,
                duration_s=900.0, cell_size_m=50.0, road_grid_spacing_m=250.0, seed=3)
    base.update(kw)
    return PipelineConfig(**base)


def simulate(cfg: PipelineConfig):
    world = sim.world_from_pipeline_config(cfg)
    tracks = sim.generate_trajectories(world, cfg.n_devices, cfg.duration_s, cfg.interval)
    samples = sim.synthesize_mr(world, tracks)
    return world, tracks, samples


def station_db(world):
    return {b.station: b for b in world.stations}


def mk_sample(imsi, ts_ms, stations, levels=None, truth=None):
    """Sample whose first station is serving; levels default to strongest-first."""
    levels = levels or [-55.0 - 8 * i for i in range(len(stations))]
    cells = tuple(CellObservation(st[0], st[1], rssi_dbm=float(r)) for st, r in zip(stations, levels))
    return MrSample(imsi, int(ts_ms), cells, truth)


def unit_grid(cell=20.0, extent=2000.0):
    return build_grid_system(BBox.from_extent(121.2, 31.25, extent, extent), cell)


# ---------------------------------------------------------------- HMM fixtures

def example_corpus():
    """Four training samples over stations A..F with states 0, 0, 1, 0."""
    import numpy as np
    from rloc.hmm import EmissionIndex, Observation, StaticHmm

    fs = frozenset
    obs = [Observation(fs("AC")), Observation(fs("BDE")), Observation(fs("BEF")), Observation(fs("BDE"))]
    states = [0, 0, 1, 0]
    index = EmissionIndex(obs, states)
    static = StaticHmm(np.array([1, 1]), np.array([[1, 1], [1, 1]]), index, "none")
    return static


def random_static(rng, n_stations=6, n_obs=40, ss_levels=3):
    from rloc.hmm import EmissionIndex, Observation, StaticHmm

    alphabet = list(range(n_stations))
    obs, states = [], []
    for i in range(n_obs):
        k = int(rng.integers(1, 4))
        bs = frozenset((1, int(x)) for x in rng.choice(alphabet, size=k, replace=False))
        obs.append(Observation(bs, int(rng.integers(1, ss_levels + 1))))
        states.append(i % 2 if i < 2 else int(rng.integers(2)))
    index = EmissionIndex(obs, states)
    init = rng.integers(1, 10, size=2)
    trans = rng.integers(0, 10, size=(2, 2))
    trans[:, 1] += 1
    return StaticHmm(init, trans, index, "serving"), obs


def random_da(rng):
    from rloc.hmm import DaHmm

    static, obs = random_static(rng)
    alpha = tuple(float(x) for x in rng.uniform(-0.01, 0.05, 2))
    beta = tuple(float(x) for x in rng.uniform(0.5, 1.5, 2))
    return DaHmm(static, alpha, beta, float(rng.integers(0, 6)), float(rng.uniform(0.25, 1.0))), obs


def random_query(rng, obs, n):
    """Mix of training observations and fresh ones (some with unseen stations)."""
    from rloc.hmm import Observation

    out = []
    for _ in range(n):
        if rng.random() < 0.6:
            out.append(obs[int(rng.integers(len(obs)))])
        else:
            k = int(rng.integers(1, 4))
            out.append(Observation(frozenset((1, int(x)) for x in rng.choice(8, size=k, replace=False)),
                                   int(rng.integers(1, 4))))
    deltas = [float(x) for x in rng.uniform(1, 60, max(0, n - 1))]
    return out, deltas


def random_graph(rng, n_levels, k):
    """Random repair graph with optional anchors; weights drawn positive."""
    from rloc.repair import build_repair_graph

    cands, w, pos = [], [], []
    for _ in range(n_levels):
        m = int(rng.integers(1, k + 1))
        cands.append([f"c{i}" for i in range(m)])
        raw = rng.random(m) + 1e-3
        w.append(raw / raw.sum())
        pos.append(rng.uniform(0, 500, (m, 2)))
    src = ("s", tuple(rng.uniform(0, 500, 2))) if rng.random() < 0.7 else None
    snk = ("t", tuple(rng.uniform(0, 500, 2))) if rng.random() < 0.7 else None
    before = tuple(rng.uniform(0, 500, 2)) if src is not None and rng.random() < 0.5 else None
    return build_repair_graph(cands, w, pos, src, snk, before, min_dist=10.0)
