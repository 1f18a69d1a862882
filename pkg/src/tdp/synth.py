"""Synthetic stand-ins for the two case-study datasets.

The real survey/lending datasets are proprietary; these generators produce
numeric analogues matching their published summary statistics: a
consumption-like regression case (n=4201, d=10, heavily right-skewed target
in [0.005, 1]) and a loan-repayment classification case (n=20788, d=15,
63.3% positive rate), plus a synthetic loan ledger.

Features are a correlated Gaussian with a random correlation structure (the
real feature semantics are not reproduced; ``moments.json`` labels the
structure as synthetic), standardized and row-clipped by the usual
pipeline. The regression target is a logistic squash of a latent linear
signal pushed through an exponential tilt whose strength is solved
numerically to match the requested skewness, then affinely mapped onto the
requested mean/std and clipped to the requested range. ``signal_strength``
in [0, 1) sets the share of target variance explained by the features; the
default 0.7 puts the non-private pipeline in a sensible accuracy regime
(it is a knob, not a calibrated quantity).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit

from .data import RecordMatrix, TargetVector, clip_rows_to_unit_ball, standardize_columns
from .errors import MomentMatchFailure
from .rng import RandomSource

TOGO_LIKE = dict(n=4201, d=10, mean=0.073, std=0.068, skewness=4.207, range=(0.005, 1.0))
NIGERIA_LIKE = dict(n=20788, d=15, positive_rate=0.633)

MEAN_TOL = 0.01
STD_TOL = 0.01
SKEW_TOL = 0.5
RATE_TOL = 0.01


@dataclass(frozen=True)
class SynthSpec:
    n: int
    d: int
    kind: str  # "regression" | "binary"
    seed: int
    target_mean: float | None = None
    target_std: float | None = None
    target_skewness: float | None = None
    target_range: tuple[float, float] | None = None
    positive_rate: float | None = None
    signal_strength: float = 0.7

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ValueError("n and d must be >= 1")
        if self.kind not in ("regression", "binary"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if not 0.0 <= self.signal_strength < 1.0:
            raise ValueError("signal_strength must be in [0, 1)")
        if self.kind == "binary" and not 0.0 < (self.positive_rate or 0) < 1.0:
            raise ValueError("binary spec needs positive_rate in (0, 1)")


def togo_like_spec(seed: int = 0, n: int | None = None, d: int | None = None,
                   signal_strength: float = 0.7) -> SynthSpec:
    return SynthSpec(
        n=n or TOGO_LIKE["n"],
        d=d or TOGO_LIKE["d"],
        kind="regression",
        seed=seed,
        target_mean=TOGO_LIKE["mean"],
        target_std=TOGO_LIKE["std"],
        target_skewness=TOGO_LIKE["skewness"],
        target_range=TOGO_LIKE["range"],
        signal_strength=signal_strength,
    )


def nigeria_like_spec(seed: int = 0, n: int | None = None, d: int | None = None,
                      signal_strength: float = 0.7) -> SynthSpec:
    return SynthSpec(
        n=n or NIGERIA_LIKE["n"],
        d=d or NIGERIA_LIKE["d"],
        kind="binary",
        seed=seed,
        positive_rate=NIGERIA_LIKE["positive_rate"],
        signal_strength=signal_strength,
    )


def _skewness(x: np.ndarray) -> float:
    centered = x - x.mean()
    m2 = float((centered**2).mean())
    if m2 == 0:
        return 0.0
    return float((centered**3).mean()) / m2**1.5


def _features_and_signal(spec: SynthSpec) -> tuple[RecordMatrix, np.ndarray]:
    """Correlated Gaussian features (preprocessed) and a unit-variance latent
    score combining the feature signal and independent noise."""
    gen = RandomSource(spec.seed).generator()
    mixing = gen.normal(size=(spec.d, spec.d))
    cov = mixing @ mixing.T
    scale = np.sqrt(np.diag(cov))
    corr = cov / np.outer(scale, scale)
    raw = gen.normal(size=(spec.n, spec.d)) @ np.linalg.cholesky(corr).T

    X, _ = standardize_columns(raw)
    X = clip_rows_to_unit_ball(X)

    beta = gen.normal(size=spec.d)
    signal = X.values @ beta
    sd = signal.std()
    signal = (signal - signal.mean()) / (sd if sd > 0 else 1.0)
    noise = gen.normal(size=spec.n)
    noise = (noise - noise.mean()) / noise.std()
    rho = spec.signal_strength
    latent = math.sqrt(rho) * signal + math.sqrt(1.0 - rho) * noise
    latent = (latent - latent.mean()) / latent.std()
    return X, latent


def synth_regression_dataset(spec: SynthSpec) -> tuple[RecordMatrix, TargetVector]:
    """Features plus a moment-matched skewed target in the requested range."""
    if spec.kind != "regression":
        raise ValueError("spec is not a regression spec")
    X, latent = _features_and_signal(spec)

    lo, hi = spec.target_range
    squashed = expit(latent)

    def standardized_tilt(theta: float) -> np.ndarray:
        w = np.exp(theta * squashed)
        return (w - w.mean()) / w.std()

    def skew_gap(theta: float) -> float:
        return _skewness(standardized_tilt(theta)) - spec.target_skewness

    try:
        theta = brentq(skew_gap, 1e-3, 80.0, xtol=1e-9)
    except ValueError as exc:  # no sign change: skewness unreachable
        raise MomentMatchFailure(
            f"skewness {spec.target_skewness} unreachable at n={spec.n}"
        ) from exc
    shape = standardized_tilt(theta)

    # Affine map onto (mean, std); fixed-point correction absorbs clip bias.
    offset, gain = spec.target_mean, spec.target_std
    y = np.clip(offset + gain * shape, lo, hi)
    for _ in range(50):
        mean_gap = y.mean() - spec.target_mean
        std_ratio = y.std() / spec.target_std
        if abs(mean_gap) < 1e-9 and abs(std_ratio - 1.0) < 1e-9:
            break
        offset -= mean_gap
        gain /= max(std_ratio, 1e-12)
        y = np.clip(offset + gain * shape, lo, hi)

    if (
        abs(y.mean() - spec.target_mean) > MEAN_TOL
        or abs(y.std() - spec.target_std) > STD_TOL
        or abs(_skewness(y) - spec.target_skewness) > SKEW_TOL
    ):
        raise MomentMatchFailure(
            f"moments off target after tuning: mean={y.mean():.4f} "
            f"std={y.std():.4f} skew={_skewness(y):.3f}"
        )
    return X, TargetVector(y, kind="regression")


def synth_classification_dataset(spec: SynthSpec) -> tuple[RecordMatrix, TargetVector]:
    """Features plus labels from a logistic model, intercept tuned to the rate."""
    if spec.kind != "binary":
        raise ValueError("spec is not a binary spec")
    X, latent = _features_and_signal(spec)
    gen = RandomSource(spec.seed, stream_id=1).generator()

    slope = 2.0  # label noise level; signal share is already in the latent

    def rate_gap(intercept: float) -> float:
        return float(expit(intercept + slope * latent).mean()) - spec.positive_rate

    intercept = brentq(rate_gap, -30.0, 30.0, xtol=1e-12)
    probs = expit(intercept + slope * latent)

    for _ in range(50):
        labels = (gen.random(spec.n) < probs).astype(float)
        if abs(labels.mean() - spec.positive_rate) <= RATE_TOL:
            return X, TargetVector(labels, kind="binary")
    raise MomentMatchFailure(
        f"empirical rate missed {spec.positive_rate} +- {RATE_TOL} at n={spec.n}"
    )


@dataclass(frozen=True)
class LoanBook:
    """Per-applicant loan economics; by default revenue equals the interest
    earned at a flat rate, the simplest internally consistent model."""

    loan_amount: np.ndarray
    interest: np.ndarray
    revenue: np.ndarray
    rate: float
    currency: str = "USD"


def synth_loan_book(
    n: int,
    rng: RandomSource,
    median_loan: float = 10.0,
    log_std: float = 0.5,
    rate: float = 0.15,
) -> LoanBook:
    """Log-normal loan sizes around the given median; interest = rate * loan."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if median_loan <= 0 or log_std < 0 or rate < 0:
        raise ValueError("economics parameters must be nonnegative (median > 0)")
    loans = rng.generator().lognormal(mean=math.log(median_loan), sigma=log_std, size=n)
    interest = rate * loans
    return LoanBook(
        loan_amount=loans, interest=interest, revenue=interest.copy(), rate=rate
    )


def target_moments(values: np.ndarray, kind: str) -> dict:
    """Empirical target moments, recomputable from the emitted CSV."""
    values = np.asarray(values, dtype=float)
    if kind == "binary":
        return {
            "kind": kind,
            "n": int(values.shape[0]),
            "positive_rate": float(values.mean()),
        }
    return {
        "kind": kind,
        "n": int(values.shape[0]),
        "mean": float(values.mean()),
        "std": float(values.std()),
        "skewness": _skewness(values),
        "min": float(values.min()),
        "max": float(values.max()),
    }
