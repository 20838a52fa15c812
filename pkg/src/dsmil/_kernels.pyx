# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled minimum-distance tables. Mirrors ``_kernels_py`` operation for operation."""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY
from libc.stdlib cimport free, malloc, qsort

cnp.import_array()


cdef int _cmp_double(const void* a, const void* b) noexcept nogil:
    cdef double x = (<const double*>a)[0]
    cdef double y = (<const double*>b)[0]
    return (x > y) - (x < y)


def min_dist_tables(const double[:, ::1] X, const cnp.int64_t[::1] x_off,
                    const double[:, ::1] P, const cnp.int64_t[::1] p_off):
    cdef Py_ssize_t n_obj = x_off.shape[0] - 1
    cdef Py_ssize_t n_proto = p_off.shape[0] - 1
    cdef Py_ssize_t n_cols = P.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    if P.shape[1] != d:
        raise ValueError("object and prototype instances differ in dimensionality")

    inst_arr = np.full((n_obj, n_cols), np.inf)
    bag_arr = np.zeros((n_obj, n_proto))
    cdef double[:, ::1] inst = inst_arr
    cdef double[:, ::1] bag = bag_arr

    cdef Py_ssize_t i, k, j, t, f, ni, start
    cdef Py_ssize_t n_max = 0
    for i in range(n_obj):
        if x_off[i + 1] - x_off[i] > n_max:
            n_max = x_off[i + 1] - x_off[i]

    cdef double s, diff, gmin, acc
    cdef double* buf = <double*>malloc(max(n_max * n_proto, 1) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n_obj):
                start = x_off[i]
                ni = x_off[i + 1] - start
                for k in range(ni):
                    for j in range(n_proto):
                        gmin = INFINITY
                        for t in range(p_off[j], p_off[j + 1]):
                            s = 0.0
                            for f in range(d):
                                diff = X[start + k, f] - P[t, f]
                                s = s + diff * diff
                            if s < inst[i, t]:
                                inst[i, t] = s
                            if s < gmin:
                                gmin = s
                        buf[j * n_max + k] = gmin
                for j in range(n_proto):
                    # sorted summation keeps the mean exactly invariant to instance order
                    qsort(&buf[j * n_max], ni, sizeof(double), _cmp_double)
                    acc = 0.0
                    for k in range(ni):
                        acc = acc + buf[j * n_max + k]
                    bag[i, j] = acc / ni
    finally:
        free(buf)
    return inst_arr, bag_arr
