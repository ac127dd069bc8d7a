# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled alignment kernels. Must agree bit-for-bit with _pykernels."""

import numpy as np

from libc.stdint cimport int8_t, uint64_t

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil

cdef enum:
    MATCH = 0
    SKIP_SCORE = 1
    SKIP_PERF = 2


def jaccard_matrix(const uint64_t[:, ::1] a, const uint64_t[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], i, j
    cdef int inter, total
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] d = out
    with nogil:
        for i in range(n):
            for j in range(m):
                inter = (__builtin_popcountll(a[i, 0] & b[j, 0])
                         + __builtin_popcountll(a[i, 1] & b[j, 1]))
                total = (__builtin_popcountll(a[i, 0] | b[j, 0])
                         + __builtin_popcountll(a[i, 1] | b[j, 1]))
                d[i, j] = 1.0 - (<double>inter) / (<double>total)
    return out


def dtw_fill(const double[:, ::1] dist, double gap):
    cdef Py_ssize_t n = dist.shape[0], m = dist.shape[1], i, j
    cdef double best, cand
    cdef int8_t choice
    cost_arr = np.empty((n + 1, m + 1), dtype=np.float64)
    step_arr = np.empty((n + 1, m + 1), dtype=np.int8)
    cdef double[:, ::1] cost = cost_arr
    cdef int8_t[:, ::1] step = step_arr
    with nogil:
        cost[0, 0] = 0.0
        step[0, 0] = -1
        for i in range(1, n + 1):
            cost[i, 0] = cost[i - 1, 0] + gap
            step[i, 0] = SKIP_SCORE
        for j in range(1, m + 1):
            cost[0, j] = cost[0, j - 1] + gap
            step[0, j] = SKIP_PERF
        for i in range(1, n + 1):
            for j in range(1, m + 1):
                best = cost[i - 1, j - 1] + dist[i - 1, j - 1]
                choice = MATCH
                cand = cost[i - 1, j] + gap
                if cand < best:
                    best = cand
                    choice = SKIP_SCORE
                cand = cost[i, j - 1] + gap
                if cand < best:
                    best = cand
                    choice = SKIP_PERF
                cost[i, j] = best
                step[i, j] = choice
    return cost_arr, step_arr
