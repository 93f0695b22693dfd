import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rloc.errors import FormatError, NoCoverageError, TrainingError
from rloc.localizer import FingerprintModel, batch_predict, fine_level, predict, train_fingerprint
from rloc.mr import group_into_sequences
from rloc.pipeline import grid_from_config

from helpers import mk_sample, simulate, small_config, unit_grid

A, B, C, D = (1, 1), (1, 2), (1, 3), (1, 4)


def _model(samples, grid=None, **kw):
    return train_fingerprint(samples, grid or unit_grid(), **kw)


def test_identical_sample_hits_its_cell():
    g = unit_grid()
    s = mk_sample("a", 0, [A, B, C], truth=g.centroid(g.cell_of_xy(333, 777)))
    m = _model([s], g)
    p = predict(m, s)
    assert p.grid == g.cell_of_xy(333, 777)
    assert p.position == g.centroid(p.grid)
    assert p.scores == {p.grid: 1.0}


def test_single_cell_training_has_one_entry():
    g = unit_grid()
    pts = [mk_sample("a", i, [A, B], truth=g.centroid(g.cell_of_xy(50, 50))) for i in range(5)]
    assert len(_model(pts, g).cells) == 1


def test_training_is_deterministic():
    cfg = small_config(n_devices=6)
    _, _, s = simulate(cfg)
    g = grid_from_config(cfg)
    assert train_fingerprint(s, g).to_dict() == train_fingerprint(s, g).to_dict()


def test_empty_training_and_missing_truth():
    with pytest.raises(TrainingError):
        _model([])
    with pytest.raises(TrainingError):
        _model([mk_sample("a", 0, [A])])


def test_unseen_serving_station_is_no_coverage():
    g = unit_grid()
    m = _model([mk_sample("a", 0, [A, B], truth=g.centroid(g.cell_of_xy(10, 10)))], g)
    with pytest.raises(NoCoverageError):
        predict(m, mk_sample("b", 0, [D]))


def test_closest_level_signature_wins():
    g = unit_grid()
    train = [mk_sample("a", 0, [A, B], truth=g.centroid(g.cell_of_xy(10, 10))),
             mk_sample("a", 1, [B], levels=[-61], truth=g.centroid(g.cell_of_xy(900, 900)))]
    m = _model(train, g)
    # B is heard in both cells; the far cell matches its level and lacks no core station
    q = mk_sample("q", 0, [B], levels=[-60])
    p = predict(m, q)
    assert p.grid == g.cell_of_xy(900, 900)


def test_batch_predict_flags_failures_and_preserves_order():
    g = unit_grid()
    m = _model([mk_sample("a", 0, [A], truth=g.centroid(g.cell_of_xy(10, 10)))], g)
    out = batch_predict(m, [mk_sample("q", 0, [A]), mk_sample("q", 1, [D]), mk_sample("q", 2, [A])])
    assert isinstance(out[1], NoCoverageError)
    assert out[0].grid == out[2].grid


def test_fine_level_matches_discrete_scale():
    assert fine_level(-50) == 1 and fine_level(-120) == 8 and fine_level(None) == 8


@pytest.fixture(scope="module")
def trained():
    cfg = small_config(n_devices=40)
    _, _, s = simulate(cfg)
    g = grid_from_config(cfg)
    half = len(s) // 2
    return train_fingerprint(s[:half], g), s[half:], g


@settings(max_examples=200)
@given(st.data())
def test_scores_normalized_and_grid_is_argmax(trained, data):
    m, test, _ = trained
    s = data.draw(st.sampled_from(test))
    p = predict(m, s)
    vals = np.array(list(p.scores.values()))
    assert abs(vals.sum() - 1) <= 1e-9 and np.all(vals >= 0)
    best = max(vals)
    assert p.grid == min(c for c, v in p.scores.items() if v == best)
    assert m.grid.contains_xy(*m.grid.centroid_xy(p.grid))


def test_predict_is_single_point(trained):
    m, test, _ = trained
    seqs = group_into_sequences(test, 120)
    a, b = seqs[0], seqs[1]
    joint = batch_predict(m, list(a.samples) + list(b.samples))
    solo = batch_predict(m, a) + batch_predict(m, b)
    assert [p.grid for p in joint] == [p.grid for p in solo]
    swapped = batch_predict(m, list(b.samples) + list(a.samples))
    assert [p.grid for p in swapped] == [p.grid for p in batch_predict(m, b) + batch_predict(m, a)]


def test_json_round_trip(trained, tmp_path):
    m, test, _ = trained
    m.save(tmp_path / "m.json")
    m2 = FingerprintModel.load(tmp_path / "m.json")
    assert [predict(m2, s) for s in test[:200]] == [predict(m, s) for s in test[:200]]
    with pytest.raises(FormatError):
        FingerprintModel.from_dict({"format": "other"})


def test_noise_free_dense_coverage_is_quantization_bound():
    cfg = small_config(area_width_m=1000.0, area_height_m=1000.0, n_stations=20, noise_sigma_db=0.0,
                       n_zones=0, n_devices=150, duration_s=1800.0, interval="uniform:1,10", cell_size_m=50.0)
    _, _, s = simulate(cfg)
    g = grid_from_config(cfg)
    rng = np.random.default_rng(0)
    idx = rng.permutation(len(s))
    train = [s[i] for i in idx[: int(0.9 * len(s))]]
    test = [s[i] for i in idx[int(0.9 * len(s)):]]
    m = train_fingerprint(train, g)
    err = np.array([g.distance_m(predict(m, q).position, q.truth) for q in test])
    assert np.mean(err <= cfg.cell_size_m * math.sqrt(2)) >= 0.95
    assert np.median(err) <= cfg.cell_size_m
