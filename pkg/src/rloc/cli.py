"""Command-line entry point: ``rloc generate|train|run|eval|pipeline``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import pipeline, sim
from .config import load_config
from .errors import DataError, RlocError, VersionError
from .mr import parse_mr_csv, write_mr_csv
from .stations import read_stations_csv, write_stations_csv

log = logging.getLogger("rloc")

OVERRIDES = {
    "seed": int, "cell_size_m": float, "tau_quantile": float, "gamma": int, "epsilon": float,
    "xi": float, "k_max": int, "d_scale": float, "workers": int,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file")
    for name, kind in OVERRIDES.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=None)


def _cfg(args, **extra):
    over = {k: getattr(args, k, None) for k in OVERRIDES}
    over.update(extra)
    return load_config(args.config, **over)


def _read_mr(path) -> list:
    with open(path, "rb") as fh:
        return parse_mr_csv(fh)


def _read_stations(path) -> dict:
    with open(path, newline="") as fh:
        return read_stations_csv(fh)


def cmd_generate(args) -> int:
    cfg = _cfg(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    world = sim.world_from_pipeline_config(cfg)
    tracks = sim.generate_trajectories(world, cfg.n_devices, cfg.duration_s, cfg.interval)
    samples = sim.synthesize_mr(world, tracks)
    with open(out / "world.csv", "w", newline="") as fh:
        sim.write_world_csv(world, fh)
    with open(out / "stations.csv", "w", newline="") as fh:
        write_stations_csv(world.stations, fh)
    with open(out / "mr.csv", "w", newline="") as fh:
        write_mr_csv(samples, fh)
    print(f"wrote {len(samples)} samples from {len(tracks)} devices to {out}")
    return 0


def cmd_train(args) -> int:
    cfg = _cfg(args)
    samples = _read_mr(args.mr)
    bundle = pipeline.train(samples, _read_stations(args.stations), cfg)
    digest = bundle.save(args.bundle)
    if args.test_out:
        with open(args.test_out, "w", newline="") as fh:
            write_mr_csv(pipeline.test_samples(samples, bundle), fh)
    print(json.dumps({"bundle": str(args.bundle), "digest": digest, "tau": bundle.tau, **bundle.stats}))
    return 0


def _write_run(rows, bundle, out: Path, detect: bool) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trajectories.csv", "w", newline="") as fh:
        pipeline.write_trajectories(rows, bundle.grid, fh)
    if detect:
        with open(out / "detection.csv", "w", newline="") as fh:
            pipeline.write_detection(rows, fh)
        with open(out / "candidates.csv", "w", newline="") as fh:
            pipeline.write_candidates(rows, fh)


def _run_cfg(args, bundle):
    over = {k: getattr(args, k) for k in ("gamma", "epsilon", "xi", "k_max", "d_scale") if getattr(args, k) is not None}
    return bundle.config.replace(**over)


def _check_grid(args, bundle) -> None:
    """A --config or --cell-size-m given at run time must describe the bundle's grid."""
    if args.config is None and args.cell_size_m is None:
        return
    want = pipeline.grid_hash(pipeline.grid_from_config(_cfg(args)))
    if want != pipeline.grid_hash(bundle.grid):
        raise VersionError("run configuration describes a different grid than the bundle")


def cmd_run(args) -> int:
    bundle = pipeline.Bundle.load(args.bundle)
    _check_grid(args, bundle)
    samples = _read_mr(args.mr)
    workers = args.workers or bundle.config.workers
    rows = pipeline.run(samples, bundle, detect=not args.no_detect, repair=not args.no_repair,
                        cfg=_run_cfg(args, bundle), workers=workers)
    _write_run(rows, bundle, Path(args.out_dir), not args.no_detect)
    print(f"processed {len(rows)} samples; {sum(r.state == 0 for r in rows)} flagged flawed")
    return 0


def cmd_eval(args) -> int:
    bundle = pipeline.Bundle.load(args.bundle)
    with open(args.trajectories, newline="") as fh:
        rows = pipeline.read_trajectories(fh, bundle.grid)
    cands = None
    if args.candidates:
        with open(args.candidates, newline="") as fh:
            cands = pipeline.read_candidates(fh)
    report, err_rows = pipeline.evaluate(rows, _read_mr(args.mr), bundle.grid, bundle.tau, cands,
                                         bundle.config.correct_repair, bundle.config.to_dict())
    report.save(args.out)
    if args.errors_out:
        from .metrics import write_errors_csv
        with open(args.errors_out, "w", newline="") as fh:
            write_errors_csv(err_rows, fh)
    print(report.to_json())
    return 0


def cmd_pipeline(args) -> int:
    cfg = _cfg(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.mr:
        if not args.stations:
            raise DataError("--mr needs --stations")
        samples, stations = _read_mr(args.mr), _read_stations(args.stations)
    else:
        world = sim.world_from_pipeline_config(cfg)
        samples = sim.synthesize_mr(world, sim.generate_trajectories(world, cfg.n_devices, cfg.duration_s,
                                                                     cfg.interval))
        stations = {b.station: b for b in world.stations}
    bundle = pipeline.train(samples, stations, cfg)
    bundle.save(out / "bundle.json")
    test = pipeline.test_samples(samples, bundle)
    detect = not args.no_detect
    rows = pipeline.run(test, bundle, detect=detect, repair=not args.no_repair, workers=cfg.workers)
    _write_run(rows, bundle, out, detect)
    report, err_rows = pipeline.evaluate(rows, test, bundle.grid, bundle.tau,
                                         {(r.imsi, r.timestamp): r.candidates for r in rows} if detect else None,
                                         cfg.correct_repair, cfg.to_dict(), detected_metrics=detect)
    report.save(out / "report.json")
    from .metrics import write_errors_csv
    with open(out / "errors.csv", "w", newline="") as fh:
        write_errors_csv(err_rows, fh)
    print(report.to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rloc", description="Telco MR localization with sequence-based "
                                     "flaw detection and repair.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="synthesize a world, stations and MR samples")
    _add_common(p)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="split, train localizer and detector, build repair profiles")
    _add_common(p)
    p.add_argument("--mr", required=True)
    p.add_argument("--stations", required=True)
    p.add_argument("--bundle", "--model-path", dest="bundle", required=True)
    p.add_argument("--test-out", help="also write the held-out test samples here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="localize, detect and repair")
    _add_common(p)
    p.add_argument("--mr", required=True)
    p.add_argument("--bundle", "--model-path", dest="bundle", required=True)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--no-repair", action="store_true")
    p.add_argument("--no-detect", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score trajectories against ground truth")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--mr", required=True, help="MR CSV carrying the truth columns")
    p.add_argument("--bundle", "--model-path", dest="bundle", required=True)
    p.add_argument("--candidates")
    p.add_argument("--out", default="report.json")
    p.add_argument("--errors-out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="generate (or read), train, run and evaluate in one go")
    _add_common(p)
    p.add_argument("--mr")
    p.add_argument("--stations")
    p.add_argument("--out-dir", default=".")
    p.add_argument("--no-repair", action="store_true")
    p.add_argument("--no-detect", action="store_true")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RlocError as exc:
        print(f"rloc: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"rloc: error: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
