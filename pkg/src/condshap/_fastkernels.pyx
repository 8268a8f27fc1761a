# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled aggregation kernels: popcounts and the exact weighted
marginal-contribution sum over all 2^M coalitions.

Mirrors condshap.kernels.pure; selected at import by condshap.kernels.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def popcount_table(int m):
    cdef cnp.int64_t[::1] table = np.zeros(1 << m, dtype=np.int64)
    cdef Py_ssize_t j, bit, i
    for j in range(m):
        bit = 1 << j
        for i in range(bit):
            table[bit + i] = table[i] + 1
    return np.asarray(table)


def shapley_aggregate(values, weights_by_size, int m):
    cdef cnp.float64_t[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.float64_t[::1] w = np.ascontiguousarray(weights_by_size, dtype=np.float64)
    if v.shape[0] != (1 << m):
        raise ValueError(f"expected {1 << m} values, got {v.shape[0]}")
    phi = np.zeros(m, dtype=np.float64)
    cdef cnp.float64_t[::1] out = phi
    cdef cnp.int64_t[::1] pc = popcount_table(m)
    cdef Py_ssize_t n_masks = 1 << m
    cdef Py_ssize_t mask, j, bit
    cdef double acc
    for j in range(m):
        bit = 1 << j
        acc = 0.0
        for mask in range(n_masks):
            if mask & bit:
                continue
            acc += w[pc[mask]] * (v[mask | bit] - v[mask])
        out[j] = acc
    return phi


def shapley_aggregate_batch(values, weights_by_size, int m):
    cdef cnp.float64_t[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef cnp.float64_t[::1] w = np.ascontiguousarray(weights_by_size, dtype=np.float64)
    if v.shape[1] != (1 << m):
        raise ValueError(f"expected (n, {1 << m}) values, got ({v.shape[0]}, {v.shape[1]})")
    phi = np.zeros((v.shape[0], m), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] out = phi
    cdef cnp.int64_t[::1] pc = popcount_table(m)
    cdef Py_ssize_t n_masks = 1 << m
    cdef Py_ssize_t i, mask, j, bit
    cdef double acc
    for i in range(v.shape[0]):
        for j in range(m):
            bit = 1 << j
            acc = 0.0
            for mask in range(n_masks):
                if mask & bit:
                    continue
                acc += w[pc[mask]] * (v[i, mask | bit] - v[i, mask])
            out[i, j] = acc
    return phi
