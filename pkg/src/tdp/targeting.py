"""Downstream targeting: cross-validated models, eligibility, and program metrics.

Two program shapes are supported. The aid-program shape trains a ridge
regression on consumption-like targets, marks everyone predicted below a
percentile cutoff as eligible, and counts exclusion errors (truly poor
people the rule misses), optionally scaled to a national population. The
lending shape trains a logistic model on repayment labels, approves
predicted low-risk applicants, and totals profit over a loan ledger.

Privatized inputs are re-standardized before model fitting: the release
pipeline scales its output by 1/proj_dim, and the eligibility rules here
depend only on prediction ranks, so re-standardizing removes the nuisance
scale without changing decisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .data import as_matrix, as_vector
from .errors import (
    MissingLedgerEntry,
    NonConvergence,
    ShapeMismatch,
    SingularSystem,
    TooFewRows,
    ZeroBaseline,
)
from .rng import RandomSource

#: Adult population scale-up used for national exclusion-error estimates
#: (2019 census total times the adult share).
TOGO_ADULT_POPULATION = 8_243_094 * 0.60

#: Budget-constraint percentile for aid eligibility.
DEFAULT_ELIGIBLE_FRACTION = 0.29

DEFAULT_RIDGE_LAMBDA = 1.0
DEFAULT_LOGISTIC_LAMBDA = 1e-3


# ---------------------------------------------------------------------------
# Cross-validation folds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FoldAssignment:
    """Fold index per row. Reuse one assignment across original and
    privatized runs so both see identical train/test splits."""

    fold_of: np.ndarray
    n_folds: int

    @property
    def n(self) -> int:
        return self.fold_of.shape[0]

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.fold_of != fold)


def kfold_split(n: int, folds: int, rng: RandomSource) -> FoldAssignment:
    """Random folds with sizes differing by at most one."""
    if folds < 2:
        raise ValueError("need at least 2 folds")
    if n < folds:
        raise TooFewRows(f"cannot split {n} rows into {folds} folds")
    perm = rng.generator().permutation(n)
    fold_of = np.empty(n, dtype=np.int64)
    for f, chunk in enumerate(np.array_split(perm, folds)):
        fold_of[chunk] = f
    return FoldAssignment(fold_of=fold_of, n_folds=folds)


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RidgeModel:
    weights: np.ndarray
    intercept: float
    lam: float
    normal_eq_residual: float  # relative residual of the optimality conditions

    def predict(self, X) -> np.ndarray:
        return as_matrix(X) @ self.weights + self.intercept


def fit_ridge(X_train, y_train, lam: float = DEFAULT_RIDGE_LAMBDA) -> RidgeModel:
    """Minimize ||y - Xw - b||^2 + lam * ||w||^2 (intercept unpenalized).

    Solved as an augmented least-squares problem; the returned model records
    the relative residual of the regularized normal equations as a
    self-check (independent of the solve path).
    """
    X = as_matrix(X_train)
    y = as_vector(y_train)
    n, d = X.shape
    if y.shape[0] != n:
        raise ShapeMismatch("X and y row counts differ")
    if lam < 0:
        raise ValueError("lam must be >= 0")

    aug = np.vstack(
        [
            np.hstack([X, np.ones((n, 1))]),
            np.hstack([math.sqrt(lam) * np.eye(d), np.zeros((d, 1))]),
        ]
    )
    rhs = np.concatenate([y, np.zeros(d)])
    solution, _, rank, _ = np.linalg.lstsq(aug, rhs, rcond=None)
    if lam == 0.0 and rank < d + 1:
        raise SingularSystem("rank-deficient design with lam = 0")
    weights, intercept = solution[:d], float(solution[d])

    # Optimality conditions: [X^T X + lam I, X^T 1; 1^T X, n] [w; b] = [X^T y; sum y]
    lhs_top = X.T @ X @ weights + lam * weights + X.sum(axis=0) * intercept
    lhs_bot = X.sum(axis=0) @ weights + n * intercept
    res = np.concatenate([lhs_top - X.T @ y, [lhs_bot - y.sum()]])
    scale = max(1.0, float(np.linalg.norm(np.concatenate([X.T @ y, [y.sum()]]))))
    return RidgeModel(
        weights=weights,
        intercept=intercept,
        lam=lam,
        normal_eq_residual=float(np.linalg.norm(res)) / scale,
    )


@dataclass(frozen=True)
class LogisticModel:
    weights: np.ndarray
    intercept: float
    lam: float
    converged: bool
    iterations: int

    def predict_proba(self, X) -> np.ndarray:
        return expit(as_matrix(X) @ self.weights + self.intercept)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return self.predict_proba(X) >= threshold


def logistic_objective(X, y, weights, intercept, lam):
    """Penalized negative log-likelihood and its gradient (weights, intercept).

    Exposed so the gradient can be audited against finite differences.
    """
    X = as_matrix(X)
    y = as_vector(y)
    z = X @ weights + intercept
    # log(1 + e^z) - y z, evaluated stably
    nll = float(np.logaddexp(0.0, z).sum() - y @ z) + 0.5 * lam * float(weights @ weights)
    p = expit(z)
    grad_w = X.T @ (p - y) + lam * weights
    grad_b = float((p - y).sum())
    return nll, grad_w, grad_b


def fit_logistic(
    X_train,
    y_train,
    lam: float = DEFAULT_LOGISTIC_LAMBDA,
    max_iter: int = 200,
    tol_factor: float = 1e-8,
) -> LogisticModel:
    """Damped Newton for L2-penalized logistic regression.

    Stops when the gradient norm falls below ``tol_factor * n``; raises
    :class:`NonConvergence` after ``max_iter`` iterations. The penalty
    applies to the weights only, so lam > 0 is required to guard against
    separable data.
    """
    X = as_matrix(X_train)
    y = as_vector(y_train)
    n, d = X.shape
    if y.shape[0] != n:
        raise ShapeMismatch("X and y row counts differ")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("labels must be in {0, 1}")
    if lam <= 0:
        raise ValueError("lam must be > 0")

    weights = np.zeros(d)
    intercept = 0.0
    nll, grad_w, grad_b = logistic_objective(X, y, weights, intercept, lam)
    for iteration in range(1, max_iter + 1):
        gnorm = math.sqrt(float(grad_w @ grad_w) + grad_b * grad_b)
        if gnorm <= tol_factor * n:
            return LogisticModel(weights, intercept, lam, True, iteration - 1)

        p = expit(X @ weights + intercept)
        curv = p * (1.0 - p)
        hess = np.empty((d + 1, d + 1))
        hess[:d, :d] = X.T @ (X * curv[:, None]) + lam * np.eye(d)
        hess[:d, d] = hess[d, :d] = X.T @ curv
        hess[d, d] = curv.sum()
        grad = np.concatenate([grad_w, [grad_b]])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.solve(hess + 1e-10 * np.eye(d + 1), grad)

        # Step halving keeps the penalized objective monotone.
        scale = 1.0
        for _ in range(60):
            cand_w = weights - scale * step[:d]
            cand_b = intercept - scale * step[d]
            cand_nll, cand_gw, cand_gb = logistic_objective(X, y, cand_w, cand_b, lam)
            if cand_nll <= nll + 1e-12 * max(1.0, abs(nll)):
                break
            scale *= 0.5
        weights, intercept = cand_w, cand_b
        nll, grad_w, grad_b = cand_nll, cand_gw, cand_gb

    raise NonConvergence(f"logistic solver did not converge in {max_iter} iterations")


def crossval_predict(X, y, folds: FoldAssignment, model: str, lam: float) -> np.ndarray:
    """Out-of-fold predictions for every row.

    Row i is predicted by the model trained on all folds except fold(i).
    Ridge returns values; logistic returns probabilities.
    """
    X = as_matrix(X)
    y = as_vector(y)
    if folds.n != X.shape[0]:
        raise ShapeMismatch("fold assignment does not match the matrix")
    preds = np.empty(X.shape[0])
    for f in range(folds.n_folds):
        train = folds.train_indices(f)
        test = folds.test_indices(f)
        if model == "ridge":
            fitted = fit_ridge(X[train], y[train], lam)
            preds[test] = fitted.predict(X[test])
        elif model == "logistic":
            fitted = fit_logistic(X[train], y[train], lam)
            preds[test] = fitted.predict_proba(X[test])
        else:
            raise ValueError(f"unknown model kind {model!r}")
    return preds


# ---------------------------------------------------------------------------
# Eligibility and program metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EligibilityRule:
    kind: str = "percentile-below"  # or "class-positive"
    percentile: float = DEFAULT_ELIGIBLE_FRACTION

    def __post_init__(self):
        if self.kind not in ("percentile-below", "class-positive"):
            raise ValueError(f"unknown eligibility kind {self.kind!r}")
        if not 0.0 < self.percentile < 1.0:
            raise ValueError("percentile must be in (0, 1)")


def percentile_threshold(values, fraction: float) -> float:
    """Order statistic at index floor(fraction * n) (0-based) of the sorted values.

    With distinct values, strictly-below selection against this threshold
    marks exactly floor(fraction * n) of them, so the selected share stays
    within 1/n of the requested fraction.
    """
    values = as_vector(values)
    n = values.shape[0]
    idx = int(math.floor(fraction * n + 1e-9))
    idx = min(idx, n - 1)
    return float(np.partition(values, idx)[idx])


def eligibility_by_percentile(predictions, rule: EligibilityRule) -> np.ndarray:
    """Flag rows whose prediction is strictly below the percentile threshold.

    Depends only on prediction ranks; all-equal predictions mark nobody.
    """
    if rule.kind != "percentile-below":
        raise ValueError("rule is not percentile-based")
    predictions = as_vector(predictions)
    return predictions < percentile_threshold(predictions, rule.percentile)


def eligibility_by_class(probabilities, threshold: float = 0.5) -> np.ndarray:
    """Classification eligibility: predicted positive class at the cutoff."""
    return as_vector(probabilities) >= threshold


def exclusion_errors_scaled(
    true_y, predictions, rule: EligibilityRule, population: float = TOGO_ADULT_POPULATION
) -> tuple[int, float]:
    """Truly-below-cutoff rows the prediction rule fails to mark eligible.

    Returns the raw sample count and its scale-up ``count / n * population``.
    The "truly poor" cutoff applies the same percentile rule to the actual
    target values.
    """
    if population <= 0:
        raise ValueError("population must be positive")
    true_y = as_vector(true_y)
    predictions = as_vector(predictions)
    if true_y.shape != predictions.shape:
        raise ShapeMismatch("target and prediction lengths differ")
    truly_poor = true_y < percentile_threshold(true_y, rule.percentile)
    marked = eligibility_by_percentile(predictions, rule)
    count = int(np.sum(truly_poor & ~marked))
    return count, count / true_y.shape[0] * population


@dataclass(frozen=True)
class ProfitLedger:
    """Per-applicant loan economics: amount, revenue if repaid, interest."""

    loan_amount: np.ndarray
    revenue: np.ndarray
    interest: np.ndarray

    def __post_init__(self):
        loan = as_vector(self.loan_amount)
        rev = as_vector(self.revenue)
        inte = as_vector(self.interest)
        if not (loan.shape == rev.shape == inte.shape):
            raise ShapeMismatch("ledger columns must have equal lengths")
        if np.any(loan <= 0):
            raise ValueError("loan amounts must be positive")
        if np.any(rev < 0) or np.any(inte < 0):
            raise ValueError("revenue and interest must be nonnegative")
        object.__setattr__(self, "loan_amount", loan)
        object.__setattr__(self, "revenue", rev)
        object.__setattr__(self, "interest", inte)

    @property
    def n(self) -> int:
        return self.loan_amount.shape[0]


def lending_profit(true_low_risk, predicted_low_risk, ledger: ProfitLedger) -> float:
    """Total lender profit over the four approval/repayment outcomes.

    Approved low-risk applicants earn their revenue; approved high-risk
    applicants cost the loan plus its interest; denied low-risk applicants
    cost their foregone revenue; denied high-risk applicants are neutral.
    """
    truth = np.asarray(true_low_risk, dtype=bool)
    approved = np.asarray(predicted_low_risk, dtype=bool)
    if truth.shape != approved.shape:
        raise ShapeMismatch("label and decision lengths differ")
    if ledger.n < truth.shape[0]:
        raise MissingLedgerEntry(
            f"ledger covers {ledger.n} applicants but {truth.shape[0]} were scored"
        )
    rev = ledger.revenue[: truth.shape[0]]
    loss = ledger.loan_amount[: truth.shape[0]] + ledger.interest[: truth.shape[0]]
    profit = np.where(
        approved,
        np.where(truth, rev, -loss),
        np.where(truth, -rev, 0.0),
    )
    return float(profit.sum())


def relative_change(metric_private: float, metric_original: float) -> float:
    """Reduction of a metric under privatization, as a percentage of baseline.

    Can exceed 100% when the private metric goes negative.
    """
    if metric_original == 0:
        raise ZeroBaseline("relative change against a zero baseline is undefined")
    return (metric_original - metric_private) / abs(metric_original) * 100.0


# ---------------------------------------------------------------------------
# Case evaluations (shared by the CLI and the sweep runner)
# ---------------------------------------------------------------------------


def restandardize(values) -> np.ndarray:
    """Tolerant column standardization for model inputs.

    Unlike the strict preprocessing entry point this maps constant columns
    to zero instead of erring: anonymized releases can legitimately contain
    them, and for model fitting a zeroed column is the right degenerate.
    """
    values = as_matrix(values)
    means = values.mean(axis=0)
    stds = values.std(axis=0)
    safe = np.where(stds > 0, stds, 1.0)
    out = (values - means) / safe
    out[:, stds == 0] = 0.0
    return out


def evaluate_regression_case(
    X,
    y,
    folds: FoldAssignment,
    rule: EligibilityRule | None = None,
    lam: float = DEFAULT_RIDGE_LAMBDA,
    population: float = TOGO_ADULT_POPULATION,
) -> dict:
    """Aid-program evaluation: eligibility accuracy and exclusion errors.

    Emits both the directly counted exclusion errors and a reconstruction
    from the per-fold average accuracy and false-positive rate, since the
    two bookkeeping conventions can differ slightly.
    """
    rule = rule or EligibilityRule()
    values = restandardize(X)
    target = as_vector(y)
    preds = crossval_predict(values, target, folds, "ridge", lam)

    truly_poor = target < percentile_threshold(target, rule.percentile)
    marked = eligibility_by_percentile(preds, rule)

    acc, fpr = _fold_rates(truly_poor, marked, folds)
    n = target.shape[0]
    count, national = exclusion_errors_scaled(target, preds, rule, population)
    negatives = int(np.sum(~truly_poor))
    rate_based = n * (1.0 - acc) - fpr * negatives

    ss_res = float(np.sum((target - preds) ** 2))
    ss_tot = float(np.sum((target - target.mean()) ** 2))
    return {
        "task": "regression",
        "n": n,
        "accuracy": acc,
        "false_positive_rate": fpr,
        "r2": 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0,
        "exclusion_errors_sample": count,
        "exclusion_errors_national": national,
        "exclusion_errors_rate_based": rate_based,
        "exclusion_errors_rate_based_national": rate_based / n * population,
        "eligible_fraction": float(marked.mean()),
        "population": population,
    }


def evaluate_classification_case(
    X,
    y,
    folds: FoldAssignment,
    ledger: ProfitLedger,
    lam: float = DEFAULT_LOGISTIC_LAMBDA,
    baseline_profit: float | None = None,
) -> dict:
    """Lending evaluation: approval accuracy and total profit."""
    values = restandardize(X)
    labels = as_vector(y)
    probs = crossval_predict(values, labels, folds, "logistic", lam)
    approved = eligibility_by_class(probs)
    truth = labels == 1.0

    acc, fpr = _fold_rates(truth, approved, folds)
    profit = lending_profit(truth, approved, ledger)
    report = {
        "task": "classification",
        "n": labels.shape[0],
        "accuracy": acc,
        "false_positive_rate": fpr,
        "profit": profit,
        "approved_fraction": float(approved.mean()),
    }
    if baseline_profit is not None:
        report["relative_change_pct"] = (
            None if baseline_profit == 0 else relative_change(profit, baseline_profit)
        )
    return report


def _fold_rates(truth, marked, folds: FoldAssignment) -> tuple[float, float]:
    """Average per-fold accuracy and false-positive rate of the marking."""
    accs, fprs = [], []
    for f in range(folds.n_folds):
        idx = folds.test_indices(f)
        t, m = truth[idx], marked[idx]
        accs.append(float(np.mean(t == m)))
        negatives = ~t
        fprs.append(float(np.sum(m & negatives) / max(1, np.sum(negatives))))
    return float(np.mean(accs)), float(np.mean(fprs))
