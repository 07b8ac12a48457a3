# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Same contracts as lenspipe._kernels_py; see that module for the reference
semantics."""

import numpy as np

cimport numpy as cnp
from libc.math cimport log2

cnp.import_array()


def laplacian_variance(grid):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] g = np.ascontiguousarray(grid, dtype=np.float64)
    cdef Py_ssize_t h = g.shape[0], w = g.shape[1]
    if h < 3 or w < 3:
        raise ValueError("grid must be 2-D and at least 3x3")
    cdef Py_ssize_t i, j
    cdef double r, acc = 0.0, acc2 = 0.0
    cdef Py_ssize_t count = (h - 2) * (w - 2)
    for i in range(1, h - 1):
        for j in range(1, w - 1):
            r = g[i - 1, j] + g[i + 1, j] + g[i, j - 1] + g[i, j + 1] - 4.0 * g[i, j]
            acc += r
            acc2 += r * r
    cdef double mean = acc / count
    return acc2 / count - mean * mean


def shannon_entropy(grid):
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] g = np.ascontiguousarray(grid, dtype=np.uint8).ravel()
    cdef Py_ssize_t n = g.shape[0]
    if n == 0:
        raise ValueError("grid must be nonempty")
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(256, dtype=np.int64)
    cdef Py_ssize_t i
    for i in range(n):
        counts[g[i]] += 1
    cdef double p, ent = 0.0
    for i in range(256):
        if counts[i] > 0:
            p = counts[i] / <double>n
            ent -= p * log2(p)
    return ent


def dedup_scan(unit, double threshold):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] x = np.ascontiguousarray(unit, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] assign = np.full(n, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] kept = np.empty(n, dtype=np.int64)
    cdef Py_ssize_t n_kept = 0
    cdef Py_ssize_t i, k, j, c
    cdef double dot
    for i in range(n):
        for k in range(n_kept):
            j = kept[k]
            dot = 0.0
            for c in range(d):
                dot += x[i, c] * x[j, c]
            if dot > threshold:
                assign[i] = j
                break
        else:
            kept[n_kept] = i
            n_kept += 1
    return assign
