"""Privacy audit attacks and their protection scores.

Three threat models, each scored in [0, 1] with 1 = fully protected:

* singling out -- can the adversary name a region of feature space that
  isolates exactly one original record? Implemented as a box ("net") attack
  around the released values.
* attribute inference -- can the adversary reconstruct unknown columns of
  original records from known columns plus the release? Implemented as a
  nearest-neighbor linkage with holdout-relative scoring, which separates
  leakage about individuals from ordinary statistical generalization.
* distinguishing -- how well can the adversary tell which of two neighboring
  datasets produced the release? Scored in closed form from the release
  noise scales, no simulation.

All attacks follow Kerckhoffs' principle: they receive the privatization
algorithm (as a callable) and its parameters as inputs, never any secret
state. An attack callable has signature ``privatizer(values, generator) ->
privatized values``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .budgets import SplitBudget, amplified_delta, _int_ceil
from .data import as_matrix
from .errors import HoldoutTooLarge, ShapeMismatch
from .rng import RandomSource

#: Multipliers of the per-column release std used as candidate net radii.
NET_SCALES = (1.0 / 10.0, 1.0 / 3.0, 1.0 / 2.0, 2.0 / 3.0, 1.0)

#: An attribute guess counts as a hit within this relative error.
ATTRIBUTE_TOLERANCE = 0.05


def identity_privatizer(values: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """The no-op release; baseline for every audit."""
    return np.asarray(values, dtype=float).copy()


# ---------------------------------------------------------------------------
# Singling out
# ---------------------------------------------------------------------------


def baseline_singling_out(X) -> float:
    """Protection of an unprotected release: the fraction of non-unique rows.

    With the raw data published, exact-match conditions isolate precisely
    the unique rows, so everyone else is safe.
    """
    values = as_matrix(X)
    _, counts = np.unique(values, axis=0, return_counts=True)
    duplicated = counts[counts >= 2].sum()
    return float(duplicated) / values.shape[0]


@dataclass(frozen=True)
class NetSpec:
    """Candidate net: per-column radius, optionally tagged with the std multiple.

    ``joint_rows`` switches the membership quantifier: by default a point is
    in the net if each of its entries is within the column radius of *any*
    released row (column-wise reading); with ``joint_rows`` a single
    released row must be close on every column at once.
    """

    eta: np.ndarray
    scale: float | None = None
    joint_rows: bool = False

    def __post_init__(self):
        eta = np.asarray(self.eta, dtype=float)
        if eta.ndim != 1 or np.any(eta < 0):
            raise ValueError("eta must be a 1-D nonnegative vector")
        object.__setattr__(self, "eta", eta)


def net_candidates(X_priv, scales=NET_SCALES, joint_rows: bool = False) -> list[NetSpec]:
    """One candidate net per std multiple, sized from the release columns."""
    stds = as_matrix(X_priv).std(axis=0)
    return [NetSpec(eta=c * stds, scale=c, joint_rows=joint_rows) for c in scales]


def net_attack(X, X_priv, spec: NetSpec) -> np.ndarray:
    """Indices of original rows the net isolates.

    Column-wise reading (default): the net is the product of per-column
    interval unions around released values; a row is singled out when it
    falls inside the net and no other original row shares its connected
    region. (Counting over the whole net would let two far-apart rows
    shield each other, which no isolation predicate the adversary writes
    down would respect.)

    Same-row reading (``joint_rows``): each released row defines a relaxed
    identity predicate, the box of half-widths eta around it; a row is
    singled out when some box contains it and no other original row.
    """
    original = as_matrix(X)
    released = as_matrix(X_priv)
    if original.shape[1] != released.shape[1]:
        raise ShapeMismatch("original and release column counts differ")
    if spec.eta.shape[0] != original.shape[1]:
        raise ShapeMismatch("eta length must equal the column count")

    if spec.joint_rows:
        return _box_isolated(original, released, spec.eta)

    in_net, region = _columnwise_regions(original, released, spec.eta)
    if not np.any(in_net):
        return np.empty(0, dtype=np.int64)
    members = np.flatnonzero(in_net)
    _, inverse, counts = np.unique(
        region[members], axis=0, return_inverse=True, return_counts=True
    )
    return members[counts[inverse] == 1]


def _columnwise_regions(original, released, eta):
    """Column-wise membership: per column, merged intervals around released values.

    The net is then a product of per-column interval unions, so a connected
    region is identified by the tuple of merged-interval ids.
    """
    n, d = original.shape
    region = np.empty((n, d), dtype=np.int64)
    for j in range(d):
        region[:, j] = _interval_ids(original[:, j], released[:, j], eta[j])
    in_net = (region >= 0).all(axis=1)
    return in_net, region


def _interval_ids(values, centers, radius):
    """Merged-interval id containing each value, or -1 if outside all intervals.

    Intervals [c - r, c + r] around sorted centers merge when consecutive
    centers are within 2r (closed intervals: touching counts as connected).
    """
    centers = np.sort(centers)
    group_of_center = np.concatenate([[0], np.cumsum(np.diff(centers) > 2 * radius)])
    n_groups = group_of_center[-1] + 1
    first = np.searchsorted(group_of_center, np.arange(n_groups), side="left")
    last = np.searchsorted(group_of_center, np.arange(n_groups), side="right") - 1
    starts = centers[first] - radius
    ends = centers[last] + radius

    pos = np.searchsorted(starts, values, side="right") - 1
    inside = (pos >= 0) & (values <= ends[np.maximum(pos, 0)])
    return np.where(inside, pos, -1)


def _box_isolated(original, released, eta):
    """Rows isolated by some per-released-row box predicate: the row lies in
    a box whose original occupancy is exactly one."""
    return np.flatnonzero(kernels.box_lone_occupant_hits(released, original, eta))


@dataclass(frozen=True)
class SinglingOutReport:
    protection_by_scale: dict
    worst_case: float
    runs: int
    per_run_by_scale: dict = field(repr=False, default_factory=dict)
    joint_by_scale: dict | None = None


def singling_out_from_draws(
    X, draws, scales=NET_SCALES, include_joint: bool = False
) -> SinglingOutReport:
    """Score precomputed release draws; radii recomputed per draw."""
    original = as_matrix(X)
    n = original.shape[0]
    draws = list(draws)
    per_run = {c: [] for c in scales}
    per_run_joint = {c: [] for c in scales} if include_joint else None
    for draw in draws:
        for spec in net_candidates(draw, scales):
            singled = net_attack(original, draw, spec)
            per_run[spec.scale].append(1.0 - len(singled) / n)
        if include_joint:
            for spec in net_candidates(draw, scales, joint_rows=True):
                singled = net_attack(original, draw, spec)
                per_run_joint[spec.scale].append(1.0 - len(singled) / n)
    means = {c: float(np.mean(v)) for c, v in per_run.items()}
    report = SinglingOutReport(
        protection_by_scale=means,
        worst_case=min(means.values()),
        runs=len(draws),
        per_run_by_scale=per_run,
        joint_by_scale=(
            {c: float(np.mean(v)) for c, v in per_run_joint.items()}
            if include_joint
            else None
        ),
    )
    return report


def singling_out_protection(
    X,
    privatizer,
    rng: RandomSource,
    runs: int = 50,
    scales=NET_SCALES,
    include_joint: bool = False,
) -> SinglingOutReport:
    """Average net-attack protection over fresh release draws, worst radius.

    The report keeps every per-radius average; ``worst_case`` is the minimum
    (the adversary picks their best radius).
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    values = as_matrix(X)
    draws = [privatizer(values, gen) for gen in rng.generators(runs)]
    return singling_out_from_draws(values, draws, scales, include_joint)


# ---------------------------------------------------------------------------
# Attribute inference
# ---------------------------------------------------------------------------


def nn_attribute_attack(victim_known, reference, known_cols, target_cols) -> np.ndarray:
    """Guess unknown columns by nearest-neighbor linkage on the known ones.

    For each victim (original values on ``known_cols``), find the reference
    row closest in Euclidean distance on those columns (ties -> lowest row
    index) and read off its ``target_cols`` values as the guesses.
    """
    victim_known = np.ascontiguousarray(victim_known, dtype=float)
    reference = as_matrix(reference)
    known_cols = np.asarray(known_cols, dtype=np.int64)
    if victim_known.shape[1] != known_cols.shape[0]:
        raise ShapeMismatch("victim values do not match the known column count")
    match = kernels.nearest_row_index(
        np.ascontiguousarray(reference[:, known_cols]), victim_known
    )
    return reference[np.ix_(match, np.asarray(target_cols, dtype=np.int64))]


def attribute_guess_hits(guesses, truths, fallback_scale, tol=ATTRIBUTE_TOLERANCE):
    """Hit mask: relative error <= tol; for exact-zero truths, compare the
    absolute guess against tol times the column scale instead."""
    guesses = np.asarray(guesses, dtype=float)
    truths = np.asarray(truths, dtype=float)
    zero = truths == 0.0
    hits = np.abs(guesses - truths) <= tol * np.abs(truths)
    hits[zero] = np.abs(guesses[zero]) <= tol * fallback_scale
    return hits


@dataclass(frozen=True)
class AttributeInferenceReport:
    protection: float  # min over (column, known-count) of the mean relative score
    cells: dict  # (column, h) -> per-cell means
    h_values: tuple
    holdout: int
    repeats: int


def attribute_inference_protection(
    X,
    privatizer,
    rng: RandomSource,
    holdout: int = 500,
    repeats: int = 50,
    h_values=None,
    deterministic_privatizer: bool = False,
    tol: float = ATTRIBUTE_TOLERANCE,
) -> AttributeInferenceReport:
    """Holdout-relative attribute-inference audit.

    A random holdout H is removed from X, the rest (the working set W) is
    privatized, and for every target column and every known-column count h
    the linkage attack runs twice: against the release of W and against the
    untouched holdout H. The relative score is the ratio of the two failure
    rates, clamped to [0, 1]: a release is only penalized for being *more*
    informative about W's individuals than a disjoint sample of the same
    population would be. Final protection is the minimum cell mean (the
    adversary picks their best column and h).

    For h not equal to d-1 the known columns are re-drawn every repeat; with
    ``deterministic_privatizer`` the h = d-1 cell runs once, since neither
    the column choice nor the release varies.
    """
    values = as_matrix(X)
    n, d = values.shape
    if holdout < 1 or holdout >= n:
        raise HoldoutTooLarge(f"holdout must be in [1, {n - 1}], got {holdout}")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if d < 2:
        raise ShapeMismatch("attribute inference needs at least 2 columns")

    if h_values is None:
        h_values = (1, math.ceil(d / 2), d - 1)
    h_values = tuple(sorted({h for h in h_values if 1 <= h <= d - 1}))

    streams = rng.generators(repeats + 1)
    gen = streams[0]  # holdout selection and column subsets
    hold_idx = gen.choice(n, size=holdout, replace=False)
    work_mask = np.ones(n, dtype=bool)
    work_mask[hold_idx] = False
    working = values[work_mask]
    held = values[hold_idx]
    col_scale = working.std(axis=0)

    ratios = {(j, h): [] for j in range(d) for h in h_values}
    raw_ratios = {key: [] for key in ratios}
    fail_priv = {key: [] for key in ratios}
    fail_hold = {key: [] for key in ratios}

    for t in range(repeats):
        release = privatizer(working, streams[t + 1])
        for h in h_values:
            if h == d - 1 and deterministic_privatizer and t > 0:
                continue
            for j in range(d):
                others = np.delete(np.arange(d), j)
                known = others if h == d - 1 else np.sort(gen.choice(others, h, replace=False))
                victims = working[:, known]
                truth = working[:, j]

                guess_p = nn_attribute_attack(victims, release, known, [j])[:, 0]
                guess_h = nn_attribute_attack(victims, held, known, [j])[:, 0]
                p_priv = 1.0 - attribute_guess_hits(guess_p, truth, col_scale[j], tol).mean()
                p_hold = 1.0 - attribute_guess_hits(guess_h, truth, col_scale[j], tol).mean()

                if p_hold > 0.0:
                    raw = p_priv / p_hold
                    ratio = min(1.0, raw)
                else:
                    # Holdout linkage never fails: any success is explained
                    # by population structure, so full relative protection.
                    raw = None
                    ratio = 1.0
                ratios[(j, h)].append(ratio)
                if raw is not None:
                    raw_ratios[(j, h)].append(raw)
                fail_priv[(j, h)].append(p_priv)
                fail_hold[(j, h)].append(p_hold)

    cells = {}
    for key, vals in ratios.items():
        raws = raw_ratios[key]
        cells[key] = {
            "relative_protection": float(np.mean(vals)),
            "raw_ratio": float(np.mean(raws)) if raws else None,
            "failure_rate_private": float(np.mean(fail_priv[key])),
            "failure_rate_holdout": float(np.mean(fail_hold[key])),
            "repeats": len(vals),
        }
    protection = min(c["relative_protection"] for c in cells.values())
    return AttributeInferenceReport(
        protection=protection,
        cells=cells,
        h_values=h_values,
        holdout=holdout,
        repeats=repeats,
    )


# ---------------------------------------------------------------------------
# Distinguishing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistinguishingReport:
    loss_projection: float | None  # expected adversary advantage, stage 1
    loss_covariance: float | None  # expected adversary advantage, stage 2
    total_loss: float
    protection: float


def distinguishing_protection(budget: SplitBudget | None) -> DistinguishingReport:
    """Closed-form protection against the likelihood-ratio distinguisher.

    Each Gaussian stage leaks an expected log-likelihood advantage; both are
    first restated at full row distance (via the step-chained parameters,
    with the stage-1 denominator keeping its unchained epsilon, as the
    calibration dictates), then combined and mapped through 1/(loss + 1)
    into [0, 1]. An unprotected release (``budget=None``) scores 0.
    """
    if budget is None:
        return DistinguishingReport(None, None, math.inf, 0.0)

    steps = _int_ceil(2.0 / budget.similarity_bound)
    eps1_hat = steps * budget.epsilon1
    delta1_hat = amplified_delta(steps, budget.epsilon1, budget.delta1)
    eps2_hat = steps * budget.epsilon2
    delta2_hat = amplified_delta(steps, budget.epsilon2, budget.delta2)

    denom1 = 4.0 * (math.log(1.0 / delta1_hat) + budget.epsilon1)
    denom2 = 16.0 * math.log(1.25 / delta2_hat)
    if denom1 <= 0.0 or denom2 <= 0.0:
        return DistinguishingReport(math.inf, math.inf, math.inf, 0.0)

    loss1 = eps1_hat**2 / denom1
    loss2 = eps2_hat**2 / denom2
    total = loss1 + loss2
    return DistinguishingReport(loss1, loss2, total, 1.0 / (total + 1.0))
