# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled attack kernels: nearest-neighbor search and box membership.

Semantics match ``_fallback`` exactly (same accumulation order, ties to the
lowest reference index); only the speed differs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def nearest_row_index(reference, queries):
    """Index of the closest reference row (squared L2) for every query row."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] ref = \
        np.ascontiguousarray(reference, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] qry = \
        np.ascontiguousarray(queries, dtype=np.float64)
    if ref.shape[1] != qry.shape[1]:
        raise ValueError("reference and queries must have equal column counts")
    if ref.shape[0] == 0:
        raise ValueError("reference must contain at least one row")

    cdef Py_ssize_t n_ref = ref.shape[0]
    cdef Py_ssize_t n_qry = qry.shape[0]
    cdef Py_ssize_t n_col = ref.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n_qry, dtype=np.int64)

    cdef Py_ssize_t i, r, j, best
    cdef double dist, best_dist, diff
    with nogil:
        for i in range(n_qry):
            best = 0
            best_dist = -1.0
            for r in range(n_ref):
                dist = 0.0
                for j in range(n_col):
                    diff = qry[i, j] - ref[r, j]
                    dist += diff * diff
                if best_dist < 0.0 or dist < best_dist:
                    best_dist = dist
                    best = r
            out[i] = best
    return out


def rows_within_box(reference, queries, radii):
    """For each query row: is some reference row within ``radii`` on every column?"""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] ref = \
        np.ascontiguousarray(reference, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] qry = \
        np.ascontiguousarray(queries, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] rad = \
        np.ascontiguousarray(radii, dtype=np.float64)
    if ref.shape[1] != qry.shape[1] or rad.shape[0] != ref.shape[1]:
        raise ValueError("column counts of reference, queries, radii must agree")

    cdef Py_ssize_t n_ref = ref.shape[0]
    cdef Py_ssize_t n_qry = qry.shape[0]
    cdef Py_ssize_t n_col = ref.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(n_qry, dtype=np.uint8)

    cdef Py_ssize_t i, r, j
    cdef bint inside
    cdef double diff
    with nogil:
        for i in range(n_qry):
            for r in range(n_ref):
                inside = True
                for j in range(n_col):
                    diff = qry[i, j] - ref[r, j]
                    if diff > rad[j] or diff < -rad[j]:
                        inside = False
                        break
                if inside:
                    out[i] = 1
                    break
    return out.view(np.bool_)


def box_lone_occupant_hits(reference, queries, radii):
    """Queries that are the single occupant of some reference row's box."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] ref = \
        np.ascontiguousarray(reference, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] qry = \
        np.ascontiguousarray(queries, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1, mode="c"] rad = \
        np.ascontiguousarray(radii, dtype=np.float64)
    if ref.shape[1] != qry.shape[1] or rad.shape[0] != ref.shape[1]:
        raise ValueError("column counts of reference, queries, radii must agree")

    cdef Py_ssize_t n_ref = ref.shape[0]
    cdef Py_ssize_t n_qry = qry.shape[0]
    cdef Py_ssize_t n_col = ref.shape[1]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out = np.zeros(n_qry, dtype=np.uint8)

    cdef Py_ssize_t i, r, j, count, lone
    cdef bint inside
    cdef double diff
    with nogil:
        for r in range(n_ref):
            count = 0
            lone = -1
            for i in range(n_qry):
                inside = True
                for j in range(n_col):
                    diff = qry[i, j] - ref[r, j]
                    if diff > rad[j] or diff < -rad[j]:
                        inside = False
                        break
                if inside:
                    count += 1
                    if count > 1:
                        break
                    lone = i
            if count == 1:
                out[lone] = 1
    return out.view(np.bool_)
