"""Reference (pure Python / numpy) implementations of the hot kernels.

Signatures match ``_ckernels``; ``rloc.kernels`` picks one at import time.
Summation order is kept identical to the compiled version so both backends
produce bit-identical floats.
"""

import numpy as np


def viterbi2(log_pi, log_a, log_b):
    """Two-state Viterbi in the log domain.

    ``log_a[t]`` is the 2x2 transition used between steps t and t+1. Ties go to
    state 1 both when choosing a predecessor and at the final step.
    """
    T = len(log_b)
    back = [[0, 0] for _ in range(T)]
    d0 = log_pi[0] + log_b[0][0]
    d1 = log_pi[1] + log_b[0][1]
    for t in range(1, T):
        a = log_a[t - 1]
        b = log_b[t]
        n0 = []
        for j in (0, 1):
            c0 = d0 + a[0][j]
            c1 = d1 + a[1][j]
            if c1 >= c0:
                back[t][j] = 1
                n0.append(c1 + b[j])
            else:
                back[t][j] = 0
                n0.append(c0 + b[j])
        d0, d1 = n0
    state = 1 if d1 >= d0 else 0
    best = d1 if state == 1 else d0
    path = [0] * T
    path[T - 1] = state
    for t in range(T - 1, 0, -1):
        state = back[t][state]
        path[t - 1] = state
    return np.array(path, dtype=np.int64), float(best)


def layered_dp(vlog, level_off, elog, edge_off):
    """Max-product path through a leveled DAG with complete bipartite levels.

    Flattened layout: level t owns ``vlog[level_off[t]:level_off[t+1]]``; the
    edge block between t and t+1 is row-major ``k_t x k_{t+1}`` starting at
    ``edge_off[t]``. Ties keep the lowest-index predecessor and the
    lowest-index final vertex. Returns (path indices, log score, relaxations).
    """
    L = len(level_off) - 1
    k0 = level_off[1] - level_off[0]
    score = [float(vlog[level_off[0] + j]) for j in range(k0)]
    parents = []
    ops = 0
    for t in range(1, L):
        kp = level_off[t] - level_off[t - 1]
        kc = level_off[t + 1] - level_off[t]
        base = edge_off[t - 1]
        new = []
        par = []
        for j in range(kc):
            best = -np.inf
            arg = 0
            for i in range(kp):
                c = score[i] + elog[base + i * kc + j]
                ops += 1
                if c > best:
                    best = c
                    arg = i
            new.append(best + vlog[level_off[t] + j])
            par.append(arg)
        score = new
        parents.append(par)
    arg = 0
    for j in range(1, len(score)):
        if score[j] > score[arg]:
            arg = j
    best = score[arg]
    path = [arg]
    for par in reversed(parents):
        arg = par[arg]
        path.append(arg)
    path.reverse()
    return np.array(path, dtype=np.int64), float(best), ops


def fingerprint_scores(mean, present, core, core_count, q_idx, q_lvl, n_unknown, penalty):
    """Similarity of one query to every grid signature.

    sim = -(L1 over shared stations) - penalty * (query stations the grid lacks
    + core stations of the grid the query lacks). Also returns shared counts.
    """
    q_idx = np.asarray(q_idx, dtype=np.int64)
    q_lvl = np.asarray(q_lvl, dtype=np.float64)
    G = mean.shape[0]
    l1 = np.zeros(G)
    shared = np.zeros(G, dtype=np.int32)
    core_hit = np.zeros(G, dtype=np.int32)
    for s, lv in zip(q_idx, q_lvl):
        p = present[:, s].astype(bool)
        l1 = l1 + np.where(p, np.abs(lv - mean[:, s]), 0.0)
        shared += p
        core_hit += core[:, s]
    missing = (len(q_idx) - shared) + n_unknown + (core_count - core_hit)
    sim = -l1 - penalty * missing
    return sim, shared


def _popcount64(a):
    a = a.astype(np.uint64)
    cnt = np.zeros(a.shape, dtype=np.int64)
    for shift in range(0, 64, 8):
        cnt += _BYTE_POP[((a >> np.uint64(shift)) & np.uint64(0xFF)).astype(np.int64)]
    return cnt


_BYTE_POP = np.array([bin(i).count("1") for i in range(256)], dtype=np.int64)


def jaccard_scan(bits, sizes, qbits, qsize, eps):
    """Indices and Jaccard values of indexed sets with J(query, set) >= eps."""
    if bits.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    inter = _popcount64(bits & qbits[None, :]).sum(axis=1)
    union = qsize + sizes - inter
    jac = np.where(union > 0, inter / np.maximum(union, 1), 0.0)
    idx = np.nonzero(jac >= eps)[0].astype(np.int64)
    return idx, jac[idx].astype(np.float64)
