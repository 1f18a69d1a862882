"""Pure-numpy implementations of the hot attack kernels.

Numerically identical to the compiled versions in ``_core.pyx``: squared
distances are accumulated in the same column order and ties resolve to the
lowest reference index, so either backend produces bit-identical attack
results.
"""

from __future__ import annotations

import numpy as np

# Cap on the temporary (chunk x refs x cols) buffers, in float64 elements.
_CHUNK_BUDGET = 4_000_000


def _chunk_size(n_ref: int, n_col: int) -> int:
    return max(1, _CHUNK_BUDGET // max(1, n_ref * n_col))


def nearest_row_index(reference: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Index of the closest reference row (squared L2) for every query row.

    Ties go to the lowest reference index.
    """
    reference = np.ascontiguousarray(reference, dtype=float)
    queries = np.ascontiguousarray(queries, dtype=float)
    if reference.ndim != 2 or queries.ndim != 2 or reference.shape[1] != queries.shape[1]:
        raise ValueError("reference and queries must be 2-D with equal column counts")
    if reference.shape[0] == 0:
        raise ValueError("reference must contain at least one row")
    out = np.empty(queries.shape[0], dtype=np.int64)
    step = _chunk_size(reference.shape[0], reference.shape[1])
    for start in range(0, queries.shape[0], step):
        block = queries[start : start + step]
        diff = block[:, None, :] - reference[None, :, :]
        d2 = np.einsum("qrc,qrc->qr", diff, diff)
        out[start : start + step] = np.argmin(d2, axis=1)  # first min wins
    return out


def rows_within_box(
    reference: np.ndarray, queries: np.ndarray, radii: np.ndarray
) -> np.ndarray:
    """For each query row: is there a reference row within ``radii`` per column?

    Membership uses closed intervals: |q_j - r_j| <= radii_j for every j.
    """
    reference = np.ascontiguousarray(reference, dtype=float)
    queries = np.ascontiguousarray(queries, dtype=float)
    radii = np.ascontiguousarray(radii, dtype=float)
    if reference.shape[1] != queries.shape[1] or radii.shape != (reference.shape[1],):
        raise ValueError("column counts of reference, queries, radii must agree")
    out = np.empty(queries.shape[0], dtype=bool)
    step = _chunk_size(reference.shape[0], reference.shape[1])
    for start in range(0, queries.shape[0], step):
        block = queries[start : start + step]
        inside = np.abs(block[:, None, :] - reference[None, :, :]) <= radii
        out[start : start + step] = inside.all(axis=2).any(axis=1)
    return out


def box_lone_occupant_hits(
    reference: np.ndarray, queries: np.ndarray, radii: np.ndarray
) -> np.ndarray:
    """Queries that are the single occupant of some reference row's box.

    The box around reference row r is {x : |x_j - r_j| <= radii_j for all j};
    a query is flagged when at least one box contains it and no other query.
    """
    reference = np.ascontiguousarray(reference, dtype=float)
    queries = np.ascontiguousarray(queries, dtype=float)
    radii = np.ascontiguousarray(radii, dtype=float)
    if reference.shape[1] != queries.shape[1] or radii.shape != (reference.shape[1],):
        raise ValueError("column counts of reference, queries, radii must agree")
    n, d = queries.shape
    hits = np.zeros(n, dtype=bool)
    step = max(1, _CHUNK_BUDGET // max(1, n))
    for start in range(0, reference.shape[0], step):
        block = reference[start : start + step]
        inside = np.ones((n, block.shape[0]), dtype=bool)
        for j in range(d):
            np.logical_and(
                inside,
                np.abs(queries[:, j, None] - block[None, :, j]) <= radii[j],
                out=inside,
            )
        lone = inside.sum(axis=0) == 1
        if lone.any():
            hits |= inside[:, lone].any(axis=1)
    return hits
