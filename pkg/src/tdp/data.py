"""Dataset containers, preprocessing, and distance utilities.

Every pipeline in this package works on an n x d feature matrix whose rows
live in the unit L2 ball. The canonical preprocessing order is: standardize
columns (mean 0, population std 1), clip rows into the ball, then min-max
scale a regression target into [0, 1]. Per-row clipping (rather than one
global rescale) keeps each record's norm bound independent of every other
record, which is what the per-record privacy accounting assumes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateRange, ShapeMismatch, ZeroVarianceColumn

# Tolerance for the row-norm invariant check.
BALL_TOL = 1e-12

# Relative threshold below which a column counts as constant.
_VAR_TOL = 1e-12


def as_matrix(x) -> np.ndarray:
    """Coerce a RecordMatrix or array-like to a float64 2-D array."""
    values = np.asarray(getattr(x, "values", x), dtype=float)
    if values.ndim != 2:
        raise ShapeMismatch(f"expected a 2-D matrix, got shape {values.shape}")
    return values


def as_vector(y) -> np.ndarray:
    values = np.asarray(getattr(y, "values", y), dtype=float)
    if values.ndim != 1:
        raise ShapeMismatch(f"expected a 1-D vector, got shape {values.shape}")
    return values


@dataclass(frozen=True)
class RecordMatrix:
    """n x d real feature matrix, one record per row.

    ``normalized`` records whether the unit-ball invariant has been
    established by :func:`clip_rows_to_unit_ball`.
    """

    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ShapeMismatch(f"record matrix must be n x d with n,d >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("record matrix contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class TargetVector:
    """Targeting variable: regression values in [0, 1] or binary labels."""

    values: np.ndarray
    kind: str  # "regression" | "binary"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise ShapeMismatch("target must be a 1-D vector")
        if self.kind == "binary":
            if not np.all(np.isin(values, (0.0, 1.0))):
                raise ValueError("binary target must contain only 0/1")
        elif self.kind == "regression":
            if values.min() < -1e-12 or values.max() > 1 + 1e-12:
                raise ValueError("regression target must lie in [0, 1]")
        else:
            raise ValueError(f"unknown target kind {self.kind!r}")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass
class PreprocessReport:
    """Everything needed to undo / audit the preprocessing of one dataset.

    ``std_convention`` is recorded explicitly because the choice (population
    std, divide by n) affects reproducibility of downstream numbers.
    """

    column_means: np.ndarray | None = None
    column_stds: np.ndarray | None = None
    row_scales: np.ndarray | None = None
    target_min: float | None = None
    target_max: float | None = None
    std_convention: str = "population"

    def to_json(self) -> str:
        def enc(v):
            if v is None:
                return None
            if isinstance(v, np.ndarray):
                return v.tolist()
            return v

        return json.dumps(
            {
                "column_means": enc(self.column_means),
                "column_stds": enc(self.column_stds),
                "row_scales": enc(self.row_scales),
                "target_min": self.target_min,
                "target_max": self.target_max,
                "std_convention": self.std_convention,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "PreprocessReport":
        raw = json.loads(text)

        def arr(v):
            return None if v is None else np.asarray(v, dtype=float)

        return cls(
            column_means=arr(raw["column_means"]),
            column_stds=arr(raw["column_stds"]),
            row_scales=arr(raw["row_scales"]),
            target_min=raw["target_min"],
            target_max=raw["target_max"],
            std_convention=raw.get("std_convention", "population"),
        )


def standardize_columns(X) -> tuple[RecordMatrix, PreprocessReport]:
    """Shift/scale each column to empirical mean 0 and population std 1.

    Raises :class:`ZeroVarianceColumn` for (near-)constant columns instead
    of dropping them: the feature count enters the privacy noise formulas,
    so silent changes to d would corrupt the accounting.
    """
    values = as_matrix(X)
    means = values.mean(axis=0)
    stds = values.std(axis=0)  # population convention (divide by n)
    bad = np.flatnonzero(stds <= _VAR_TOL * np.maximum(1.0, np.abs(means)))
    if bad.size:
        raise ZeroVarianceColumn(int(bad[0]))
    out = (values - means) / stds
    report = PreprocessReport(column_means=means, column_stds=stds)
    return RecordMatrix(out, normalized=False), report


def clip_rows_to_unit_ball(X) -> RecordMatrix:
    """Scale any row with L2 norm > 1 back onto the unit sphere.

    Rows already inside the ball are returned unchanged (idempotent).
    """
    values = as_matrix(X).copy()
    norms = np.linalg.norm(values, axis=1)
    over = norms > 1.0
    if np.any(over):
        values[over] /= norms[over, None]
    return RecordMatrix(values, normalized=True)


def row_clip_scales(X) -> np.ndarray:
    """Per-row factor that :func:`clip_rows_to_unit_ball` applies (<= 1)."""
    norms = np.linalg.norm(as_matrix(X), axis=1)
    return np.where(norms > 1.0, 1.0 / np.maximum(norms, 1.0), 1.0)


def scale_target_unit_interval(y) -> TargetVector:
    """Min-max scale a regression target to [0, 1]; binary labels pass through."""
    values = as_vector(y)
    unique = np.unique(values)
    if np.all(np.isin(unique, (0.0, 1.0))):
        return TargetVector(values, kind="binary")
    lo, hi = float(values.min()), float(values.max())
    if hi <= lo:
        raise DegenerateRange("target has max <= min; cannot scale to [0, 1]")
    return TargetVector((values - lo) / (hi - lo), kind="regression")


def preprocess(X_raw, y_raw=None):
    """Full pipeline: standardize columns, clip rows, scale target.

    Returns ``(RecordMatrix, TargetVector | None, PreprocessReport)``.
    """
    standardized, report = standardize_columns(X_raw)
    report.row_scales = row_clip_scales(standardized)
    clipped = clip_rows_to_unit_ball(standardized)
    target = None
    if y_raw is not None:
        raw = as_vector(y_raw)
        target = scale_target_unit_interval(raw)
        if target.kind == "regression":
            report.target_min = float(raw.min())
            report.target_max = float(raw.max())
    return clipped, target, report


def cumulative_distance(X, X_other) -> float:
    """Sum of row-wise L2 distances between two equal-shape matrices."""
    a = as_matrix(X)
    b = as_matrix(X_other)
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return float(np.linalg.norm(a - b, axis=1).sum())


def validate_l2_ball(X) -> bool:
    """True iff every row has L2 norm <= 1 (+ tolerance)."""
    values = as_matrix(X)
    return bool(np.all(np.linalg.norm(values, axis=1) <= 1.0 + BALL_TOL))


# ---------------------------------------------------------------------------
# CSV helpers. One record per line, header row with column names, full float
# precision so that files round-trip bit-exactly.
# ---------------------------------------------------------------------------


def write_csv(path, values, columns) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] != len(columns):
        raise ShapeMismatch("column names do not match value width")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in values:
            writer.writerow([repr(float(v)) for v in row])


def read_csv(path) -> tuple[np.ndarray, list[str]]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    return np.asarray(rows, dtype=float), header
