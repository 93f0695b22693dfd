"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from rloc import _kernels_py as py

try:
    from rloc import _ckernels as cy
except ImportError:  # extension not built
    cy = None


def cases(rng):
    T = 200
    log_pi = np.log(np.array([0.3, 0.7]))
    log_a = np.log(rng.dirichlet([1, 1], size=(T - 1, 2)))
    log_b = np.log(rng.uniform(1e-3, 1, size=(T, 2)))
    yield "viterbi2 (T=200)", (np.ascontiguousarray(log_pi), np.ascontiguousarray(log_a),
                               np.ascontiguousarray(log_b))

    n, k = 10, 15
    vlog = np.log(rng.uniform(0.01, 1, n * k))
    level_off = np.arange(0, n * k + 1, k, dtype=np.int64)
    elog = np.log(rng.uniform(0.01, 1, (n - 1) * k * k))
    edge_off = np.arange(0, (n - 1) * k * k + 1, k * k, dtype=np.int64)
    yield "layered_dp (n=10, k=15)", (vlog, level_off, elog, edge_off)

    G, S = 5000, 50
    count = rng.integers(0, 3, size=(G, S))
    present = (count > 0).astype(np.uint8)
    mean = np.where(present, rng.uniform(1, 8, (G, S)), 0.0)
    core = (present & (rng.random((G, S)) < 0.5)).astype(np.uint8)
    core_count = core.sum(axis=1).astype(np.int32)
    q_idx = rng.choice(S, 7, replace=False).astype(np.int64)
    q_lvl = rng.uniform(1, 8, 7)
    yield "fingerprint_scores (G=5000)", (mean, present, core, core_count, q_idx, q_lvl, 0, 2.0)

    D, W = 10000, 1
    bits = rng.integers(0, 2**63, size=(D, W), dtype=np.uint64)
    sizes = np.array([bin(int(b)).count("1") for b in bits[:, 0]], dtype=np.int64)
    q = bits[0].copy()
    yield "jaccard_scan (D=10000)", (bits, sizes, q, int(sizes[0]), 0.5)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':30s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, a in cases(rng):
        fn = name.split()[0]
        tp = min(timeit.repeat(lambda: getattr(py, fn)(*a), number=1, repeat=args.repeat)) * 1e3
        if cy is None:
            print(f"{name:30s} {tp:10.3f} {'n/a':>10s}")
            continue
        tc = min(timeit.repeat(lambda: getattr(cy, fn)(*a), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:30s} {tp:10.3f} {tc:10.3f} {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
