"""End-to-end orchestration: train a bundle, run localize/detect/repair, evaluate."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Mapping, Optional, Sequence

from .config import PipelineConfig
from .errors import DataError, FormatError, NoCoverageError, RlocError, TrainingError, VersionError
from .grid import BBox, GridCellId, GridSystem, build_grid_system
from .hmm import (DaHmm, LabeledSequence, compute_tau, estimate_da_hmm, label_confidence, observation_of,
                  train_static_hmm, viterbi_decode)
from .localizer import FingerprintModel, train_fingerprint
from .metrics import (EvalReport, candidate_metrics, detection_metrics, quantiles_of, repair_metrics)
from .mr import DatasetSplit, MrSample, MrSequence, group_into_sequences, split_dataset
from .repair import GridProfile, ProfileTable, build_grid_profiles, repair_sequence

log = logging.getLogger(__name__)

BUNDLE_FORMAT = "rloc.bundle"
BUNDLE_VERSION = 1


def grid_from_config(cfg: PipelineConfig) -> GridSystem:
    bbox = BBox.from_extent(cfg.origin_lon, cfg.origin_lat, cfg.area_width_m, cfg.area_height_m)
    return build_grid_system(bbox, cfg.cell_size_m)


# ---------------------------------------------------------------- bundle


@dataclass(frozen=True, eq=False)
class Bundle:
    config: PipelineConfig
    grid: GridSystem
    localizer: FingerprintModel
    hmm: DaHmm
    static_hmm: DaHmm  # same base with decay and smoothing disabled
    profiles: ProfileTable
    stations: dict  # station -> (lon, lat)
    tau: float
    test_keys: tuple = ()
    stats: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        body = {
            "format": BUNDLE_FORMAT, "version": BUNDLE_VERSION,
            "config": self.config.to_dict(), "grid": self.grid.to_dict(),
            "grid_hash": grid_hash(self.grid), "tau": self.tau,
            "localizer": self.localizer.to_dict(), "hmm": self.hmm.to_dict(),
            "profiles": [[p.grid.col, p.grid.row, sorted(map(list, p.bs_all)),
                          sorted(map(list, p.bs_serving)), p.n_samples] for p in self.profiles.profiles],
            "stations": sorted([list(k), list(v)] for k, v in self.stations.items()),
            "test_keys": [list(k) for k in self.test_keys], "stats": self.stats,
        }
        body["digest"] = digest_of(body)
        return body

    @classmethod
    def from_dict(cls, d: dict) -> "Bundle":
        if d.get("format") != BUNDLE_FORMAT:
            raise FormatError("not a model bundle")
        if d.get("version") != BUNDLE_VERSION:
            raise VersionError(f"bundle version {d.get('version')} unsupported")
        grid = GridSystem.from_dict(d["grid"])
        if d["grid_hash"] != grid_hash(grid):
            raise VersionError("bundle grid hash does not match its grid")
        cfg = PipelineConfig.from_dict(d["config"])
        stations = {tuple(k): tuple(v) for k, v in d["stations"]}
        profiles = tuple(GridProfile(GridCellId(c, r), frozenset(map(tuple, a)), frozenset(map(tuple, s)), n)
                         for c, r, a, s, n in d["profiles"])
        table = ProfileTable(grid, profiles, {k: grid.projection.to_xy(*v) for k, v in stations.items()})
        hmm = DaHmm.from_dict(d["hmm"])
        return cls(cfg, grid, FingerprintModel.from_dict(d["localizer"]), hmm, static_view(hmm), table,
                   stations, d["tau"], tuple(tuple(k) for k in d["test_keys"]), d.get("stats", {}))

    def save(self, path: str | Path) -> str:
        """Atomic write; returns the digest."""
        body = self.to_dict()
        path = Path(path)
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                json.dump(body, fh, sort_keys=True)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return body["digest"]

    @classmethod
    def load(cls, path: str | Path) -> "Bundle":
        try:
            d = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not JSON ({exc})") from exc
        return cls.from_dict(d)


def grid_hash(grid: GridSystem) -> str:
    return hashlib.sha256(grid.fingerprint().encode()).hexdigest()[:16]


def digest_of(body: dict) -> str:
    clean = {k: v for k, v in body.items() if k != "digest"}
    return hashlib.sha256(json.dumps(clean, sort_keys=True).encode()).hexdigest()


def static_view(hmm: DaHmm) -> DaHmm:
    """The DA-HMM with alpha=0, beta=1, gamma=0, which decodes exactly like its static base."""
    return DaHmm(hmm.base, (0.0, 0.0), (1.0, 1.0), 0, hmm.epsilon, (True, True))


# ---------------------------------------------------------------- training


def _errors(model, samples, grid) -> tuple:
    preds, errs = [], []
    for s in samples:
        try:
            p = model.predict(s)
        except NoCoverageError:
            preds.append(None)
            errs.append(math.inf)  # unlocalizable counts as flawed
            continue
        preds.append(p.grid)
        errs.append(grid.distance_m(p.position, s.truth))
    return preds, errs


def label_sequences(model, sequences: Sequence[MrSequence], grid: GridSystem, tau: Optional[float],
                    quantile: float, ss_match: str) -> tuple:
    """Predict, pick tau (when not given) and label; returns (labeled, tau)."""
    per_seq = []
    all_err = []
    for seq in sequences:
        if any(s.truth is None for s in seq.samples):
            raise TrainingError("confidence training sample without ground truth")
        _, errs = _errors(model, seq.samples, grid)
        per_seq.append(errs)
        all_err.extend(e for e in errs if math.isfinite(e))
    if tau is None:
        tau = compute_tau(all_err, quantile)
    labeled = []
    for seq, errs in zip(sequences, per_seq):
        states = [0 if not math.isfinite(e) else int(label_confidence([e], tau)[0]) for e in errs]
        obs = tuple(observation_of(s, ss_match) for s in seq.samples)
        labeled.append(LabeledSequence(seq.imsi, obs, tuple(states), tuple(seq.deltas)))
    return labeled, tau


def train(samples: Sequence[MrSample], stations: Mapping, cfg: PipelineConfig,
          grid: Optional[GridSystem] = None) -> Bundle:
    grid = grid_from_config(cfg) if grid is None else grid
    stage = "split"
    try:
        seqs = group_into_sequences(samples, cfg.max_gap_s)
        split = split_dataset(seqs, cfg.seed, cfg.p_test, cfg.p_dc)
        stage = "localizer"
        d_l = DatasetSplit.samples_of(split.d_l)
        model = train_fingerprint(d_l, grid, cfg.knn_k, cfg.missing_penalty)
        stage = "labeling"
        labeled, tau = label_sequences(model, split.d_c, grid, None, cfg.tau_quantile, cfg.ss_match)
        stage = "static-hmm"
        static = train_static_hmm(labeled, cfg.ss_match)
        stage = "da-hmm"
        hmm = estimate_da_hmm(static, labeled, cfg.gamma, cfg.epsilon)
        stage = "profiles"
        profiles = build_grid_profiles(d_l + DatasetSplit.samples_of(split.d_c), grid, stations)
    except RlocError as exc:
        exc.args = (f"[{stage}] {exc}",) + exc.args[1:]
        raise
    n_flawed = sum(s.count(0) for s in (l.states for l in labeled))
    stats = {"n_sequences": len(seqs), "n_dl": len(d_l), "n_dc": sum(len(l.states) for l in labeled),
             "n_test": sum(len(s) for s in split.d_test), "n_dc_flawed": n_flawed,
             "alpha": list(hmm.alpha), "beta": list(hmm.beta), "fit_fallback": list(hmm.fallback)}
    st = {k: ((v.lon, v.lat) if hasattr(v, "lon") else tuple(v)) for k, v in stations.items()}
    return Bundle(cfg, grid, model, hmm, static_view(hmm), profiles, st, float(tau),
                  tuple(s.key for s in split.d_test), stats)


def test_samples(samples: Sequence[MrSample], bundle: Bundle) -> list:
    """The held-out test part of ``samples`` under the bundle's split."""
    keys = set(bundle.test_keys)
    seqs = group_into_sequences(samples, bundle.config.max_gap_s)
    return DatasetSplit.samples_of([s for s in seqs if s.key in keys])


# ---------------------------------------------------------------- running


@dataclass(frozen=True)
class RunRow:
    imsi: str
    timestamp: int
    pred: Optional[GridCellId]
    state: int
    log_prob: float
    repaired: Optional[GridCellId]
    run_id: int
    candidates: tuple = ()


def process_sequence(bundle: Bundle, seq: MrSequence, detect: bool = True, repair: bool = True,
                     detector: str = "da", cfg: Optional[PipelineConfig] = None) -> list:
    cfg = bundle.config if cfg is None else cfg
    preds = []
    for s in seq.samples:
        try:
            preds.append(bundle.localizer.predict(s).grid)
        except NoCoverageError:
            preds.append(None)
    if not detect:
        return [RunRow(s.imsi, s.timestamp, p, 1, 0.0, p, -1) for s, p in zip(seq.samples, preds)]
    hmm = bundle.hmm if detector == "da" else bundle.static_hmm
    if cfg.gamma != hmm.gamma or cfg.epsilon != hmm.epsilon:
        if detector == "da":
            hmm = DaHmm(hmm.base, hmm.alpha, hmm.beta, cfg.gamma, cfg.epsilon, hmm.fallback)
    obs = [observation_of(s, hmm.ss_match) for s in seq.samples]
    dec = viterbi_decode(hmm, obs, list(seq.deltas))
    states = [int(x) for x in dec.states]
    if not repair:
        return [RunRow(s.imsi, s.timestamp, p, st, dec.log_prob, p, -1)
                for s, p, st in zip(seq.samples, preds, states)]
    eff = [0 if p is None else st for p, st in zip(preds, states)]
    rep = repair_sequence(seq.samples, preds, eff, bundle.profiles, cfg.xi, cfg.k_max, cfg.d_scale, cfg.c_floor)
    return [RunRow(s.imsi, s.timestamp, preds[i], states[i], dec.log_prob, rep.entries[i].repaired,
                   rep.entries[i].run_id, rep.candidates.get(i, ()))
            for i, s in enumerate(seq.samples)]


_WORKER = {}


def _init_worker(bundle_dict, kwargs):
    _WORKER["bundle"] = Bundle.from_dict(bundle_dict)
    _WORKER["kwargs"] = kwargs


def _work(seq):
    return process_sequence(_WORKER["bundle"], seq, **_WORKER["kwargs"])


def run(samples: Sequence[MrSample], bundle: Bundle, detect: bool = True, repair: bool = True,
        detector: str = "da", cfg: Optional[PipelineConfig] = None, workers: int = 1) -> list:
    """Rows ordered by (imsi, timestamp) regardless of worker count."""
    seqs = group_into_sequences(samples, bundle.config.max_gap_s)
    kwargs = dict(detect=detect, repair=repair, detector=detector, cfg=cfg)
    if workers > 1 and len(seqs) > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker,
                                 initargs=(bundle.to_dict(), kwargs)) as ex:
            parts = list(ex.map(_work, seqs, chunksize=max(1, len(seqs) // (4 * workers))))
    else:
        parts = [process_sequence(bundle, s, **kwargs) for s in seqs]
    rows = [r for p in parts for r in p]
    rows.sort(key=lambda r: (r.imsi, r.timestamp))
    return rows


# ---------------------------------------------------------------- I/O


TRAJ_HEADER = ["imsi", "timestamp", "pred_lon", "pred_lat", "state", "rep_lon", "rep_lat", "run_id"]
DET_HEADER = ["imsi", "timestamp", "predicted_state", "log_prob"]


def _pos(grid, cell):
    if cell is None:
        return ["", ""]
    lon, lat = grid.centroid(cell)
    return [repr(lon), repr(lat)]


def write_trajectories(rows: Iterable[RunRow], grid: GridSystem, stream: IO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(TRAJ_HEADER)
    for r in rows:
        w.writerow([r.imsi, r.timestamp, *_pos(grid, r.pred), r.state, *_pos(grid, r.repaired), r.run_id])


def write_detection(rows: Iterable[RunRow], stream: IO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(DET_HEADER)
    for r in rows:
        w.writerow([r.imsi, r.timestamp, r.state, repr(r.log_prob)])


def write_candidates(rows: Iterable[RunRow], stream: IO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["imsi", "timestamp", "candidates"])
    for r in rows:
        if r.state == 0:
            w.writerow([r.imsi, r.timestamp, ";".join(str(c) for c in r.candidates)])


def read_trajectories(stream: IO, grid: GridSystem) -> list:
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or list(reader.fieldnames[:len(TRAJ_HEADER)]) != TRAJ_HEADER:
        raise FormatError("trajectories CSV header mismatch")

    def cell(lon, lat):
        return None if lon == "" else grid.grid_of(float(lon), float(lat))

    rows = []
    for i, rec in enumerate(reader, start=1):
        try:
            rows.append(RunRow(rec["imsi"], int(rec["timestamp"]), cell(rec["pred_lon"], rec["pred_lat"]),
                               int(rec["state"]), 0.0, cell(rec["rep_lon"], rec["rep_lat"]), int(rec["run_id"])))
        except ValueError as exc:
            raise DataError(f"trajectories row {i}: {exc}") from exc
    return rows


def read_candidates(stream: IO) -> dict:
    out = {}
    for rec in csv.DictReader(stream):
        cells = tuple(GridCellId.parse(c) for c in rec["candidates"].split(";") if c)
        out[(rec["imsi"], int(rec["timestamp"]))] = cells
    return out


# ---------------------------------------------------------------- evaluation


def evaluate(rows: Sequence[RunRow], truth: Sequence[MrSample], grid: GridSystem, tau: float,
             candidates: Optional[Mapping] = None, criterion: str = "grid", config: Optional[dict] = None,
             detected_metrics: bool = True) -> tuple:
    """Returns (EvalReport, per-sample error rows)."""
    by_key = {(s.imsi, s.timestamp): s for s in truth if s.truth is not None}
    keep = [r for r in rows if (r.imsi, r.timestamp) in by_key]
    if len(keep) != len(rows):
        raise DataError(f"{len(rows) - len(keep)} trajectory rows have no truth")
    before, after, err_rows = [], [], []
    truth_grid, rep_grid, rep_err = {}, {}, {}
    det, flawed = set(), set()
    for r in keep:
        k = (r.imsi, r.timestamp)
        t = by_key[k].truth
        tg = grid.grid_of(*t)
        eb = math.inf if r.pred is None else grid.distance_m(grid.centroid(r.pred), t)
        ea = math.inf if r.repaired is None else grid.distance_m(grid.centroid(r.repaired), t)
        before.append(eb)
        after.append(ea)
        truth_grid[k], rep_grid[k], rep_err[k] = tg, r.repaired, ea
        if r.state == 0:
            det.add(k)
        if eb > tau:
            flawed.add(k)
        err_rows.append((r.imsi, r.timestamp, eb, ea))
    qa = quantiles_of(after)
    rep = EvalReport(qa.mean_m, qa.median_m, qa.p67_m, qa.p90_m, qa.p95_m, n_samples=len(keep),
                     config=config or {})
    if detected_metrics:
        rep.precision, rep.recall, rep.f_score = detection_metrics(det, flawed)
        rep.repair_accuracy, rep.i_d, rep.i_s, rep.i_l = repair_metrics(
            before, after, sorted(det), rep_grid, truth_grid, tau, criterion, rep_err)
        if candidates is not None:
            ks = sorted(k for k in det if k in candidates)
            rep.p_c, rep.mean_candidates = candidate_metrics([candidates[k] for k in ks],
                                                             [truth_grid[k] for k in ks])
    return rep, err_rows
