# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled row-streaming softmax kernels.

Each output row is reduced sequentially in key order, so results are
identical from run to run.
"""
import numpy as np

from libc.math cimport exp, INFINITY

cdef enum:
    MODE_SQDIST = 0
    MODE_DOT = 1


def softmax_smooth(const double[:, ::1] queries, const double[:, ::1] keys,
                   const double[:, ::1] values, double tau, int mode):
    cdef Py_ssize_t n = queries.shape[0], m = keys.shape[0]
    cdef Py_ssize_t d = queries.shape[1], c = values.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, diff, mx, w, total
    out_arr = np.zeros((n, c), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] logits = np.empty(m, dtype=np.float64)
    cdef double[::1] acc = np.empty(c, dtype=np.float64)
    with nogil:
        for i in range(n):
            mx = -INFINITY
            for j in range(m):
                s = 0.0
                if mode == MODE_SQDIST:
                    for k in range(d):
                        diff = queries[i, k] - keys[j, k]
                        s = s + diff * diff
                    s = -s / tau
                else:
                    for k in range(d):
                        s = s + queries[i, k] * keys[j, k]
                    s = s / tau
                logits[j] = s
                if s > mx:
                    mx = s
            total = 0.0
            for k in range(c):
                acc[k] = 0.0
            for j in range(m):
                w = exp(logits[j] - mx)
                total = total + w
                for k in range(c):
                    acc[k] = acc[k] + w * values[j, k]
            for k in range(c):
                out[i, k] = acc[k] / total
    return out_arr


def pseudo_argmin(const double[:, ::1] queries, const double[:, ::1] keys, int mode):
    cdef Py_ssize_t n = queries.shape[0], m = keys.shape[0], d = queries.shape[1]
    cdef Py_ssize_t i, j, k, best
    cdef double s, diff, lo, second
    idx_arr = np.empty(n, dtype=np.int64)
    gap_arr = np.empty(n, dtype=np.float64)
    cdef long long[::1] idx = idx_arr
    cdef double[::1] gap = gap_arr
    with nogil:
        for i in range(n):
            lo = INFINITY
            second = INFINITY
            best = 0
            for j in range(m):
                s = 0.0
                if mode == MODE_SQDIST:
                    for k in range(d):
                        diff = queries[i, k] - keys[j, k]
                        s = s + diff * diff
                else:
                    for k in range(d):
                        s = s - queries[i, k] * keys[j, k]
                if s < lo:
                    second = lo
                    lo = s
                    best = j
                elif s < second:
                    second = s
            idx[i] = best
            gap[i] = second - lo
    return idx_arr, gap_arr
