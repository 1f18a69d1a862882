"""Greedy multidimensional k-anonymity baseline.

Rows are recursively partitioned: at each node the candidate split column
is the one with the widest range after normalizing by the column's global
range, the cut is at the median with ties sent to the low side, and a cut
is allowed only if both sides keep at least k rows. Columns are tried in
decreasing normalized-range order until one admits a cut; if none does the
node becomes a leaf and every quasi-identifier value in it is replaced by
the leaf's column mean. Numeric recoding (means, not interval strings)
keeps the output usable by downstream regression models.

The procedure uses no randomness: one input and one k give one output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RecordMatrix, as_matrix
from .errors import TooFewRows


@dataclass(frozen=True)
class AnonymityParams:
    k: int
    quasi_identifiers: tuple[int, ...] | None = None  # None = every column

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


def mondrian_anonymize(X, params: AnonymityParams) -> RecordMatrix:
    values = as_matrix(X)
    n, d = values.shape
    if n < params.k:
        raise TooFewRows(f"need at least k={params.k} rows, got {n}")
    qi = params.quasi_identifiers
    qi = tuple(range(d)) if qi is None else tuple(qi)

    global_span = values.max(axis=0) - values.min(axis=0)

    out = values.copy()
    stack = [np.arange(n)]
    while stack:
        idx = stack.pop()
        cut = _allowable_cut(values, idx, qi, params.k, global_span)
        if cut is None:
            out[np.ix_(idx, qi)] = values[np.ix_(idx, qi)].mean(axis=0)
        else:
            stack.extend(cut)
    return RecordMatrix(out)


def _allowable_cut(values, idx, qi, k, global_span):
    sub = values[idx]
    spans = np.zeros(len(qi))
    for pos, col in enumerate(qi):
        if global_span[col] > 0:
            spans[pos] = (sub[:, col].max() - sub[:, col].min()) / global_span[col]
    # Widest normalized range first; ties resolve to the lowest column index
    # (stable sort on the negated spans).
    for pos in np.argsort(-spans, kind="stable"):
        if spans[pos] <= 0:
            break
        col = qi[pos]
        median = np.median(sub[:, col])
        low = sub[:, col] <= median  # ties to the low side
        if k <= low.sum() <= len(idx) - k:
            return idx[low], idx[~low]
    return None


def verify_k_anonymity(X_priv, k: int) -> bool:
    """True iff every distinct row value-tuple occurs at least k times."""
    values = as_matrix(X_priv)
    _, counts = np.unique(values, axis=0, return_counts=True)
    return bool(np.all(counts >= k))
