"""Privacy budget algebra for targeted differential privacy.

A targeted guarantee is parameterized by ``(B, epsilon, delta)`` where the
similarity bound ``B`` in (0, 2] limits the L2 distance between the single
differing rows of the dataset pairs the guarantee covers. ``B = 2`` covers
every pair of rows in the unit ball and recovers ordinary (epsilon, delta)
differential privacy.

This module provides the feasibility test relating a budget to a required
targeting accuracy, the conversion from a targeted budget to an ordinary DP
guarantee, and sequential / parallel composition.

The feasibility test is a *necessary* condition only: passing it means
accurate targeting is not provably impossible at that budget, never that a
particular mechanism and model will achieve the accuracy. Use it to prune
budgets, not to certify them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# ceil() with a snap-to-integer guard: ratios like 2/B for B = 2/m land one
# ulp away from the integer m in either direction, and a raw ceil would then
# be off by one.
_SNAP = 1e-9


def _int_ceil(x: float) -> int:
    r = round(x)
    if abs(x - r) <= _SNAP * max(1.0, abs(x)):
        return int(r)
    return int(math.ceil(x))


@dataclass(frozen=True)
class TdpBudget:
    """One (B, epsilon, delta) targeted-privacy guarantee."""

    similarity_bound: float  # B in (0, 2]
    epsilon: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.similarity_bound <= 2.0:
            raise ValueError(f"similarity bound must be in (0, 2], got {self.similarity_bound}")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must be in [0, 1)")


@dataclass(frozen=True)
class AccuracyRequirement:
    """Required probability gamma that an eligibility decision survives privatization."""

    gamma: float

    def __post_init__(self):
        if not 0.5 <= self.gamma < 1.0:
            raise ValueError("gamma must be in [0.5, 1)")


@dataclass(frozen=True)
class ClassicEquivalent:
    """Ordinary DP guarantee implied by a targeted one (see to_classic_dp)."""

    steps: int  # number of similarity-bound hops covering the row distance
    epsilon: float
    delta: float

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must be in [0, 1]")


@dataclass(frozen=True)
class SplitBudget:
    """The six-parameter budget driving the private projection algorithm.

    Stage 1 (random projection + Gaussian noise) consumes (epsilon1, delta1);
    stage 2 (Gram matrix + symmetric Gaussian noise) consumes (epsilon2,
    delta2). ``delta1 < 1/2`` and ``epsilon2 in (0, 1)`` are hard
    requirements of the respective noise calibrations. ``proj_dim`` is the
    dimensionality of the intermediate projection space.
    """

    similarity_bound: float
    epsilon1: float
    delta1: float
    epsilon2: float
    delta2: float
    proj_dim: int

    def __post_init__(self):
        if not 0.0 < self.similarity_bound <= 2.0:
            raise ValueError(f"similarity bound must be in (0, 2], got {self.similarity_bound}")
        if self.epsilon1 <= 0.0:
            raise ValueError("epsilon1 must be positive")
        if not 0.0 < self.delta1 < 0.5:
            raise ValueError("delta1 must be in (0, 1/2)")
        if not 0.0 < self.epsilon2 < 1.0:
            raise ValueError("epsilon2 must be in (0, 1)")
        if not 0.0 < self.delta2 < 1.0:
            raise ValueError("delta2 must be in (0, 1)")
        if self.proj_dim < 1:
            raise ValueError("proj_dim must be >= 1")

    def stage_budgets(self) -> tuple[TdpBudget, TdpBudget]:
        b = self.similarity_bound
        return (
            TdpBudget(b, self.epsilon1, self.delta1),
            TdpBudget(b, self.epsilon2, self.delta2),
        )

    def composed(self) -> TdpBudget:
        """Total guarantee of running both stages on the same data."""
        return compose_sequential(list(self.stage_budgets()))


def accuracy_odds(epsilon: float, delta: float, gamma: float) -> float:
    """Odds-style factor comparing correct vs flipped eligibility mass.

    Equals (delta + gamma*(e^eps - 1)) / (delta + (1-gamma)*(e^eps - 1)).
    Always >= 1 for gamma >= 1/2, exactly 1 at gamma = 1/2, and tends to
    gamma/(1-gamma) as delta -> 0 or epsilon -> inf.
    """
    if not 0.5 <= gamma < 1.0:
        raise ValueError("gamma must be in [0.5, 1)")
    if epsilon > 700.0:  # e^eps overflows; the delta terms are negligible
        return gamma / (1.0 - gamma)
    growth = math.expm1(epsilon)
    return (delta + gamma * growth) / (delta + (1.0 - gamma) * growth)


def targeting_feasible(
    similarity_bound: float, epsilon: float, delta: float, gamma: float
) -> bool:
    """Necessary-condition check for gamma-accurate targeting at this budget.

    True means some mechanism at (B, epsilon, delta) *could* keep each
    eligibility decision unchanged with probability gamma; False means the
    combination is provably impossible, for every mechanism.
    """
    odds = accuracy_odds(epsilon, delta, gamma)
    hops = _int_ceil(2.0 / similarity_bound)
    required = _int_ceil(math.log(odds) / epsilon)
    return hops >= required


def max_feasible_bound(epsilon: float, delta: float, gamma: float) -> float:
    """Largest B of the form 2/m (m a positive integer) passing the check.

    Restricted to the 2/m grid because the feasibility inequality only has
    an unambiguous inverse when 2/B is an integer.
    """
    if not 0.5 < gamma < 1.0:
        raise ValueError("gamma must be in (0.5, 1)")
    odds = accuracy_odds(epsilon, delta, gamma)
    m = max(1, _int_ceil(math.log(odds) / epsilon))
    return 2.0 / m


def to_classic_dp(budget: TdpBudget, distance: float = 2.0) -> ClassicEquivalent:
    """Ordinary DP parameters implied for row pairs up to ``distance`` apart.

    Chains the targeted guarantee along s = ceil(distance / B) hops of
    length <= B, giving epsilon' = s*epsilon and delta' = min(1,
    (e^{s eps} - 1)/(e^eps - 1) * delta). At B = 2 and distance = 2 this is
    the identity.
    """
    if not 0.0 < distance <= 2.0:
        raise ValueError("distance must be in (0, 2]")
    steps = max(1, _int_ceil(distance / budget.similarity_bound))
    return ClassicEquivalent(
        steps=steps,
        epsilon=steps * budget.epsilon,
        delta=amplified_delta(steps, budget.epsilon, budget.delta),
    )


def amplified_delta(steps: int, epsilon: float, delta: float) -> float:
    """min(1, (e^{s eps} - 1)/(e^eps - 1) * delta), stable for huge s*eps."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if steps == 1 or delta == 0.0:
        return min(1.0, delta)
    big = steps * epsilon
    if big <= 700.0:
        factor = math.expm1(big) / math.expm1(epsilon)
        return min(1.0, factor * delta)
    # log-space: log factor = s*eps + log(1 - e^{-s*eps}) - log(e^eps - 1)
    log_delta = big - _log_expm1(epsilon) + math.log(delta)
    if log_delta >= 0.0:
        return 1.0
    return math.exp(log_delta)


def _log_expm1(x: float) -> float:
    if x > 700.0:
        return x
    return math.log(math.expm1(x))


def compose_sequential(budgets: list[TdpBudget]) -> TdpBudget:
    """Guarantee for running all mechanisms on the same data: (min B, sum eps, sum delta)."""
    if not budgets:
        raise ValueError("cannot compose an empty list of budgets")
    return TdpBudget(
        similarity_bound=min(b.similarity_bound for b in budgets),
        epsilon=sum(b.epsilon for b in budgets),
        delta=sum(b.delta for b in budgets),
    )


def compose_parallel(budgets: list[TdpBudget]) -> TdpBudget:
    """Guarantee for mechanisms run on disjoint rows: (min B, max eps, max delta).

    The caller is responsible for the disjointness of the underlying data.
    """
    if not budgets:
        raise ValueError("cannot compose an empty list of budgets")
    return TdpBudget(
        similarity_bound=min(b.similarity_bound for b in budgets),
        epsilon=max(b.epsilon for b in budgets),
        delta=max(b.delta for b in budgets),
    )
