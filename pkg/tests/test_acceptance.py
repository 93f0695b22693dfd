"""Acceptance criteria A1-A9, each at its stated tolerance and runtime budget.

A one-line PASS/FAIL per criterion is printed in the pytest terminal summary.
"""

import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rloc import sim
from rloc.config import PipelineConfig
from rloc.grid import BBox, GridCellId, build_grid_system
from rloc.hmm import (DaHmm, EmissionIndex, Observation, P_FLOOR, StaticHmm, adaptive_emission,
                      brute_force_decode, gauss_newton_exp_decay, jaccard, observation_of, viterbi_decode)
from rloc.metrics import quantiles_of
from rloc.mr import group_into_sequences, split_dataset
from rloc import pipeline
from rloc.pipeline import static_view
from rloc.repair import (build_grid_profiles, build_repair_graph, dp_max_joint_path, enumerate_paths,
                         repair_sequence, vertex_weights, select_candidates)

from helpers import example_corpus, mk_sample, random_da, random_graph, random_query, unit_grid

fs = frozenset


# ---------------------------------------------------------------- A1

@pytest.mark.acceptance("A1")
def test_a1_worked_example(note):
    t0 = time.perf_counter()
    da = DaHmm(example_corpus(), (0.0, 0.0), (1.0, 1.0), gamma=2, epsilon=0.5)
    b_bef = adaptive_emission(da, Observation(fs("BEF")), 0)
    b_b = adaptive_emission(da, Observation(fs("B")), 0)
    j = jaccard(fs("BEF"), fs("BDE"))
    elapsed = time.perf_counter() - t0
    note(f"b(BEF)={b_bef:.4f} b(B)={b_b:.4f} J={j}")
    assert abs(b_bef - 0.293) <= 0.005
    assert b_b == 2 / 3
    assert j == 0.5
    assert elapsed < 1.0


# ---------------------------------------------------------------- A2

@pytest.mark.acceptance("A2")
def test_a2_viterbi_oracle(note):
    t0 = time.perf_counter()
    worst = 0.0
    n_models = 150
    for seed in range(n_models):
        rng = np.random.default_rng([seed, 2])
        da, obs = random_da(rng)
        for n in range(1, 9):
            q, d = random_query(rng, obs, n)
            v, b = viterbi_decode(da, q, d), brute_force_decode(da, q, d)
            assert v.states.tolist() == b.states.tolist(), (seed, n)
            worst = max(worst, abs(v.log_prob - b.log_prob))
    elapsed = time.perf_counter() - t0
    note(f"{n_models} models x lengths 1..8, max |dlogp|={worst:.1e}")
    assert worst <= 1e-9
    assert elapsed < 10


# ---------------------------------------------------------------- A3

@pytest.mark.acceptance("A3")
def test_a3_dp_oracle(note):
    t0 = time.perf_counter()
    worst = 0.0
    n_graphs = 400
    for seed in range(n_graphs):
        rng = np.random.default_rng([seed, 3])
        g = random_graph(rng, int(rng.integers(1, 6)), int(rng.integers(1, 5)))
        a, b = dp_max_joint_path(g), enumerate_paths(g)
        assert a.indices == b.indices, seed
        worst = max(worst, abs(a.log_prob - b.log_prob) / max(abs(b.log_prob), 1e-300))
    elapsed = time.perf_counter() - t0
    note(f"{n_graphs} graphs, max rel dlogp={worst:.1e}")
    assert worst <= 1e-12
    assert elapsed < 10


# ---------------------------------------------------------------- A4

@pytest.mark.acceptance("A4")
def test_a4_gauss_newton(note):
    t0 = time.perf_counter()
    d = np.arange(5, 125, 5, dtype=float)
    truth = np.exp(-0.02 * d) * 0.9 * 0.8
    fit = gauss_newton_exp_decay(d, truth, 0.8)
    assert abs(fit.alpha - 0.02) / 0.02 <= 1e-6
    assert abs(fit.beta - 0.9) / 0.9 <= 1e-6
    ok = 0
    for trial in range(50):
        rng = np.random.default_rng([trial, 4])
        f = gauss_newton_exp_decay(d, truth + rng.normal(0, 0.01, len(d)), 0.8)
        ok += abs(f.alpha - 0.02) / 0.02 <= 0.1 and abs(f.beta - 0.9) / 0.9 <= 0.1
    elapsed = time.perf_counter() - t0
    note(f"noiseless exact, noisy {ok}/50 within 10%")
    assert ok >= 45
    assert elapsed < 5


# ---------------------------------------------------------------- shared benchmark

def _flow(**kw):
    """Generate, train and split one benchmark world; returns (bundle, test samples, timings)."""
    cfg = PipelineConfig(**kw)
    t0 = time.perf_counter()
    world = sim.world_from_pipeline_config(cfg)
    samples = sim.synthesize_mr(world, sim.generate_trajectories(world, cfg.n_devices, cfg.duration_s,
                                                                 cfg.interval))
    t1 = time.perf_counter()
    bundle = pipeline.train(samples, {b.station: b for b in world.stations}, cfg)
    t2 = time.perf_counter()
    return bundle, pipeline.test_samples(samples, bundle), {"generate": t1 - t0, "train": t2 - t1}


def _evaluate(bundle, test, **kw):
    t0 = time.perf_counter()
    rows = pipeline.run(test, bundle, **kw)
    rep, _ = pipeline.evaluate(rows, test, bundle.grid, bundle.tau)
    return rep, time.perf_counter() - t0


BENCH = dict(seed=0, n_devices=420, duration_s=3600.0, interval="uniform:1,60")


@pytest.fixture(scope="module")
def benchmark():
    bundle, test, timings = _flow(**BENCH)
    cfg = bundle.config
    assert (cfg.area_width_m, cfg.area_height_m, cfg.n_stations, cfg.zone_coverage) == (4000, 4000, 50, 0.15)
    return bundle, test, timings


# ---------------------------------------------------------------- A5

@pytest.mark.acceptance("A5")
def test_a5_collapse_to_static(benchmark, note):
    bundle, test, _ = benchmark
    t0 = time.perf_counter()
    seqs = group_into_sequences(test, bundle.config.max_gap_s)
    chunks = []
    for s in seqs:
        for a in range(0, len(s), 9):
            chunks.append((s.samples[a:a + 9], s.deltas[a:a + 8]))
    assert len(chunks) >= 1000
    chunks = chunks[:1000]
    collapsed = static_view(bundle.hmm)
    base = bundle.hmm.base
    flips = 0
    for samples, deltas in chunks:
        obs = [observation_of(x, base.ss_match) for x in samples]
        a, b = viterbi_decode(collapsed, obs, list(deltas)), viterbi_decode(base, obs, list(deltas))
        assert a.states.tolist() == b.states.tolist() and a.log_prob == b.log_prob
        flips += int(np.any(a.states == 0))
    elapsed = time.perf_counter() - t0
    note(f"1000 sequences identical ({flips} with flawed states)")
    assert elapsed < 10


# ---------------------------------------------------------------- A6

@pytest.mark.acceptance("A6")
def test_a6_end_to_end(benchmark, note):
    bundle, test, timings = benchmark
    base, t_base = _evaluate(bundle, test, detect=False)
    full, t_full = _evaluate(bundle, test)
    total = timings["generate"] + timings["train"] + t_base + t_full
    gain = 1 - full.p95_m / base.p95_m
    note(f"n_test={len(test)} median {base.median_m:.2f}->{full.median_m:.2f} m, "
         f"p95 {base.p95_m:.0f}->{full.p95_m:.0f} m ({gain:.1%}), flow {total:.1f} s")
    assert 5000 <= len(test) <= 20000
    assert full.median_m < base.median_m
    assert full.p95_m < base.p95_m and gain >= 0.10
    assert total < 60


# ---------------------------------------------------------------- A7

@pytest.mark.acceptance("A7")
def test_a7_uneven_sampling(benchmark, note):
    bundle, test, _ = benchmark
    t0 = time.perf_counter()
    da, _ = _evaluate(bundle, test, repair=False)
    stat, _ = _evaluate(bundle, test, repair=False, detector="static")
    note(f"uniform[1,60]: F da={da.f_score:.3f} static={stat.f_score:.3f}")
    assert da.f_score >= stat.f_score
    assert time.perf_counter() - t0 < 60


@pytest.mark.acceptance("A7")
def test_a7_fixed_interval_control(note):
    t0 = time.perf_counter()
    bundle, test, _ = _flow(**dict(BENCH, n_devices=70, interval="fixed:5"))
    da, _ = _evaluate(bundle, test, repair=False)
    stat, _ = _evaluate(bundle, test, repair=False, detector="static")
    note(f"fixed 5 s: F da={da.f_score:.3f} static={stat.f_score:.3f}")
    assert time.perf_counter() - t0 < 60
    assert abs(da.f_score - stat.f_score) <= 0.05


# ---------------------------------------------------------------- A8

A8 = settings(max_examples=1000, deadline=None)
_INDEX = EmissionIndex(*zip(*[(Observation(fs((1, int(x)) for x in np.random.default_rng(i).choice(12, 3, replace=False)),
                                           int(i % 4)), i % 2) for i in range(200)]))
_STATIC = StaticHmm(np.array([3, 7]), np.array([[4, 6], [2, 18]]), _INDEX)
_GRID = unit_grid(cell=50.0)
_STATIONS = {(7, i): (121.2 + 0.002 * (i % 5), 31.25 + 0.002 * (i // 5)) for i in range(15)}
_TRAIN = [mk_sample("t", i, [(7, (i + j) % 15) for j in range(3)],
                    truth=_GRID.centroid(GridCellId(i % 17, (3 * i) % 13))) for i in range(300)]
_PROFILES = build_grid_profiles(_TRAIN, _GRID, _STATIONS)


@pytest.mark.acceptance("A8")
@A8
@given(st.floats(-0.5, 2), st.floats(1e-3, 10), st.floats(0, 1e5), st.integers(0, 1))
def test_a8_transition_rows(alpha, beta, delta, i):
    da = DaHmm(_STATIC, (alpha, alpha), (beta, beta), 5, 0.5)
    row = da.transition_row(i, delta)
    assert abs(row[0] + row[1] - 1) <= 1e-15
    assert P_FLOOR <= min(row) and max(row) <= 1 - P_FLOOR


@pytest.mark.acceptance("A8")
@A8
@given(st.sets(st.integers(0, 14), min_size=1, max_size=5), st.floats(0.05, 1.0), st.integers(1, 20))
def test_a8_weight_normalization(stations, eps, k):
    idx, _, w = _INDEX.similar_sets(fs((1, s) for s in stations), eps)
    if len(idx):
        assert abs(w.sum() - 1) <= 1e-9
    q = mk_sample("q", 0, [(7, s) for s in sorted(stations)])
    kept, vw, _ = vertex_weights(q, select_candidates(q, _PROFILES, eps, k), _PROFILES)
    if kept:
        assert abs(vw.sum() - 1) <= 1e-9 and np.all(vw >= 0)


@pytest.mark.acceptance("A8")
@A8
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 14)), min_size=1, max_size=10))
def test_a8_non_flawed_immutable(items):
    states = [s for s, _ in items]
    samples = [mk_sample("q", i, [(7, (c + j) % 15) for j in range(3)]) for i, (_, c) in enumerate(items)]
    preds = [GridCellId(c, c) for _, c in items]
    out = repair_sequence(samples, preds, states, _PROFILES, 0.6, 8)
    for e, p, s in zip(out.entries, preds, states):
        if s == 1:
            assert e.repaired is p


@pytest.mark.acceptance("A8")
@A8
@given(st.lists(st.floats(0, 1e6), min_size=1, max_size=100))
def test_a8_quantile_monotonicity(errs):
    q = quantiles_of(errs)
    assert q.median_m <= q.p67_m <= q.p90_m <= q.p95_m


@pytest.mark.acceptance("A8")
@A8
@given(st.integers(0, 2 ** 32 - 1), st.integers(3, 12))
def test_a8_determinism_under_seeds(seed, n):
    samples = [mk_sample(f"d{i}", 0, [(7, i % 15)]) for i in range(n)]
    seqs = group_into_sequences(samples, 120)
    assert split_dataset(seqs, seed) == split_dataset(list(reversed(seqs)), seed)
    rng_a, rng_b = np.random.default_rng(seed), np.random.default_rng(seed)
    da, obs = random_da(rng_a)
    db, _ = random_da(rng_b)
    q, d = random_query(rng_a, obs, 6)
    assert viterbi_decode(da, q, d).states.tolist() == viterbi_decode(db, q, d).states.tolist()


@pytest.mark.acceptance("A8")
@A8
@given(st.floats(-170, 170), st.floats(-60, 60), st.floats(200, 5000), st.floats(200, 5000),
       st.floats(5, 150), st.data())
def test_a8_grid_round_trip(lon, lat, w, h, cell, data):
    g = build_grid_system(BBox.from_extent(lon, lat, w, h), cell)
    c = GridCellId(data.draw(st.integers(0, g.n_cols - 1)), data.draw(st.integers(0, g.n_rows - 1)))
    assert g.grid_of(*g.centroid(c)) == c
    assert GridCellId.parse(str(c)) == c


@pytest.mark.acceptance("A8")
def test_a8_runtime_budget(note):
    from conftest import ACCEPTANCE
    spent = ACCEPTANCE.get("A8", {}).get("seconds", 0.0)
    note("6 invariant suites x 1000 cases")
    assert spent < 60


# ---------------------------------------------------------------- A9

def _ops(n, k):
    rng = np.random.default_rng([n, k])
    cands = [list(range(k))] * n
    w = [np.full(k, 1.0 / k)] * n
    pos = [rng.uniform(0, 1000, (k, 2)) for _ in range(n)]
    g = build_repair_graph(cands, w, pos, source=("s", (0.0, 0.0)), sink=("t", (1000.0, 1000.0)))
    return dp_max_joint_path(g).ops


@pytest.mark.acceptance("A9")
def test_a9_dp_complexity(note):
    base = _ops(8, 8)
    rk = _ops(8, 16) / base
    rn = _ops(16, 8) / base
    note(f"ops(8,8)={base}, x{rk:.2f} for 2k, x{rn:.2f} for 2n")
    assert abs(rk - 4) <= 0.15 * 4
    assert abs(rn - 2) <= 0.15 * 2
