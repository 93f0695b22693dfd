# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_kernels_py`` for the contracts."""

import numpy as np
from libc.math cimport fabs, INFINITY


def viterbi2(const double[::1] log_pi, const double[:, :, ::1] log_a, const double[:, ::1] log_b):
    cdef Py_ssize_t T = log_b.shape[0]
    cdef Py_ssize_t t
    cdef int j, state
    cdef double d0, d1, n0, n1, c0, c1, best
    back_arr = np.zeros((T, 2), dtype=np.int8)
    cdef signed char[:, ::1] back = back_arr
    d0 = log_pi[0] + log_b[0, 0]
    d1 = log_pi[1] + log_b[0, 1]
    for t in range(1, T):
        c0 = d0 + log_a[t - 1, 0, 0]
        c1 = d1 + log_a[t - 1, 1, 0]
        if c1 >= c0:
            back[t, 0] = 1
            n0 = c1 + log_b[t, 0]
        else:
            back[t, 0] = 0
            n0 = c0 + log_b[t, 0]
        c0 = d0 + log_a[t - 1, 0, 1]
        c1 = d1 + log_a[t - 1, 1, 1]
        if c1 >= c0:
            back[t, 1] = 1
            n1 = c1 + log_b[t, 1]
        else:
            back[t, 1] = 0
            n1 = c0 + log_b[t, 1]
        d0 = n0
        d1 = n1
    state = 1 if d1 >= d0 else 0
    best = d1 if state == 1 else d0
    path_arr = np.empty(T, dtype=np.int64)
    cdef long long[::1] path = path_arr
    path[T - 1] = state
    for t in range(T - 1, 0, -1):
        state = back[t, state]
        path[t - 1] = state
    return path_arr, best


def layered_dp(const double[::1] vlog, const long long[::1] level_off, const double[::1] elog,
               const long long[::1] edge_off):
    cdef Py_ssize_t L = level_off.shape[0] - 1
    cdef Py_ssize_t kmax = 0
    cdef Py_ssize_t t, i, j, kp, kc, base, arg, total = 0
    cdef long long ops = 0
    cdef double c, best
    for t in range(L):
        kc = level_off[t + 1] - level_off[t]
        total += kc
        if kc > kmax:
            kmax = kc
    score_arr = np.empty(kmax, dtype=np.float64)
    new_arr = np.empty(kmax, dtype=np.float64)
    par_arr = np.zeros(total, dtype=np.int64)
    cdef double[::1] score = score_arr
    cdef double[::1] new = new_arr
    cdef double[::1] tmp
    cdef long long[::1] par = par_arr
    kc = level_off[1] - level_off[0]
    for j in range(kc):
        score[j] = vlog[level_off[0] + j]
    for t in range(1, L):
        kp = level_off[t] - level_off[t - 1]
        kc = level_off[t + 1] - level_off[t]
        base = edge_off[t - 1]
        for j in range(kc):
            best = -INFINITY
            arg = 0
            for i in range(kp):
                c = score[i] + elog[base + i * kc + j]
                ops += 1
                if c > best:
                    best = c
                    arg = i
            new[j] = best + vlog[level_off[t] + j]
            par[level_off[t] + j] = arg
        tmp = score
        score = new
        new = tmp
    kc = level_off[L] - level_off[L - 1]
    arg = 0
    for j in range(1, kc):
        if score[j] > score[arg]:
            arg = j
    best = score[arg]
    path_arr = np.empty(L, dtype=np.int64)
    cdef long long[::1] path = path_arr
    path[L - 1] = arg
    for t in range(L - 1, 0, -1):
        arg = par[level_off[t] + arg]
        path[t - 1] = arg
    return path_arr, best, ops


def fingerprint_scores(const double[:, ::1] mean, const unsigned char[:, ::1] present,
                       const unsigned char[:, ::1] core, const int[::1] core_count,
                       const long long[::1] q_idx, const double[::1] q_lvl,
                       long n_unknown, double penalty):
    cdef Py_ssize_t G = mean.shape[0]
    cdef Py_ssize_t m = q_idx.shape[0]
    cdef Py_ssize_t g, k
    cdef long long s
    cdef double l1
    cdef int sh, ch
    sim_arr = np.empty(G, dtype=np.float64)
    shared_arr = np.empty(G, dtype=np.int32)
    cdef double[::1] sim = sim_arr
    cdef int[::1] shared = shared_arr
    for g in range(G):
        l1 = 0.0
        sh = 0
        ch = 0
        for k in range(m):
            s = q_idx[k]
            if present[g, s]:
                l1 = l1 + fabs(q_lvl[k] - mean[g, s])
                sh += 1
            else:
                l1 = l1 + 0.0
            ch += core[g, s]
        shared[g] = sh
        sim[g] = -l1 - penalty * <double>((m - sh) + n_unknown + (core_count[g] - ch))
    return sim_arr, shared_arr


cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


cdef inline int _pop(unsigned long long x) noexcept nogil:
    return __builtin_popcountll(x)


def jaccard_scan(const unsigned long long[:, ::1] bits, const long long[::1] sizes,
                 const unsigned long long[::1] qbits,
                 long long qsize, double eps):
    cdef Py_ssize_t D = bits.shape[0]
    cdef Py_ssize_t W = bits.shape[1]
    cdef Py_ssize_t d, w, n = 0
    cdef long long inter, union
    cdef double jac
    idx_arr = np.empty(D, dtype=np.int64)
    jac_arr = np.empty(D, dtype=np.float64)
    cdef long long[::1] idx = idx_arr
    cdef double[::1] jv = jac_arr
    for d in range(D):
        inter = 0
        for w in range(W):
            inter += _pop(bits[d, w] & qbits[w])
        union = qsize + sizes[d] - inter
        if union > 0:
            jac = <double>inter / <double>union
        else:
            jac = 0.0
        if jac >= eps:
            idx[n] = d
            jv[n] = jac
            n += 1
    return idx_arr[:n].copy(), jac_arr[:n].copy()
