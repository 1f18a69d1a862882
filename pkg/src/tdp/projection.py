"""Private projection: produce a targeted-DP release of a record matrix.

The release pipeline, for an n x d input X with rows in the unit L2 ball
and a six-parameter :class:`~tdp.budgets.SplitBudget`:

1. sample a d x k sign matrix R with entries uniform over {-1, 0, +1};
2. project: P = X R / k;
3. perturb the projection: add i.i.d. Gaussian noise at ``projection_sigma``;
4. perturb the Gram matrix: C = X^T X plus a symmetric Gaussian matrix whose
   upper triangle (including the diagonal) is i.i.d. at ``covariance_sigma``
   and mirrored below, so C stays exactly symmetric;
5. take V^T, the right singular vectors of the noisy Gram matrix;
6. return X_priv = P_noisy (V^T R)^+ V^T, with an SVD pseudo-inverse.

Stage 1-3 consumes (epsilon1, delta1), stage 4 consumes (epsilon2, delta2),
so the release satisfies the (B, epsilon1+epsilon2, delta1+delta2) targeted
guarantee; ``PrivatizationOutput`` carries that certificate plus its
ordinary-DP equivalent.

Note the output is scaled by 1/k relative to the input (the noiseless
pipeline reconstructs X/k exactly); downstream consumers that care about
scale, not just ranks, should re-standardize.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .budgets import ClassicEquivalent, SplitBudget, to_classic_dp
from .data import RecordMatrix, as_matrix, validate_l2_ball
from .errors import RankDeficientProjection, ShapeMismatch, TooFewRows
from .rng import RandomSource

#: Probability of a zero entry in the sign matrix.
ZERO_ENTRY_PROB = 1.0 / 3.0

_UNSAFE_ENV = "TDP_UNSAFE_ZERO_NOISE"


def projection_sigma(budget: SplitBudget, n_features: int) -> float:
    """Noise scale for the projected coordinates (stage 1).

    sigma = (B / sqrt(k)) * sqrt(d * ln((2/3)(e-1) + 1) - ln(delta1/2) / k)
            * sqrt(2 * (ln(1/delta1) + epsilon1)) / epsilon1
    """
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    b = budget.similarity_bound
    k = budget.proj_dim
    d1 = budget.delta1
    e1 = budget.epsilon1
    spread = n_features * math.log((1.0 - ZERO_ENTRY_PROB) * (math.e - 1.0) + 1.0)
    spread -= math.log(d1 / 2.0) / k
    gauss = math.sqrt(2.0 * (math.log(1.0 / d1) + e1)) / e1
    return (b / math.sqrt(k)) * math.sqrt(spread) * gauss


def covariance_sigma(budget: SplitBudget) -> float:
    """Noise scale for the Gram-matrix perturbation (stage 2).

    sigma = 2 B sqrt(2 ln(1.25 / delta2)) / epsilon2
    """
    b = budget.similarity_bound
    return 2.0 * b * math.sqrt(2.0 * math.log(1.25 / budget.delta2)) / budget.epsilon2


def delta_convention(n: int, partitions: int = 1) -> tuple[float, float, float]:
    """Per-partition (delta, delta1, delta2) for a dataset of n individuals.

    delta = 1 / (ceil(n / partitions) + 1), i.e. strictly below the inverse
    of the number of individuals each privatization run touches; the first
    stage gets two thirds of it and the second stage one third.
    """
    if n < 1 or partitions < 1:
        raise ValueError("n and partitions must be >= 1")
    per_part = -(-n // partitions)  # ceil
    delta = 1.0 / (per_part + 1)
    return delta, 2.0 * delta / 3.0, delta / 3.0


@dataclass(frozen=True)
class BaseBudget:
    """Budget template without deltas; deltas are derived from the data size."""

    similarity_bound: float
    epsilon1: float
    epsilon2: float
    proj_dim: int

    def with_deltas(self, n: int, partitions: int = 1) -> SplitBudget:
        _, d1, d2 = delta_convention(n, partitions)
        return SplitBudget(
            similarity_bound=self.similarity_bound,
            epsilon1=self.epsilon1,
            delta1=d1,
            epsilon2=self.epsilon2,
            delta2=d2,
            proj_dim=self.proj_dim,
        )


@dataclass(frozen=True)
class ProjectionMatrix:
    """d x k sign matrix with entries in {-1, 0, +1}."""

    entries: np.ndarray
    zero_prob: float = ZERO_ENTRY_PROB

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if not np.all(np.isin(entries, (-1.0, 0.0, 1.0))):
            raise ValueError("projection entries must be in {-1, 0, 1}")
        # Sanity check against a miswired sampler: with >= 1e4 entries the
        # zero fraction must sit within 5 sigma of its expectation.
        size = entries.size
        if size >= 10_000:
            frac = float((entries == 0.0).mean())
            bound = 5.0 * math.sqrt(self.zero_prob * (1.0 - self.zero_prob) / size)
            if abs(frac - self.zero_prob) > bound:
                raise ValueError(
                    f"zero fraction {frac:.4f} implausible for p0={self.zero_prob:.4f}"
                )
        object.__setattr__(self, "entries", entries)


def sample_projection(n_features: int, proj_dim: int, rng: RandomSource) -> ProjectionMatrix:
    """Sample the d x k sign matrix; deterministic under a fixed source."""
    if n_features < 1 or proj_dim < 1:
        raise ValueError("dimensions must be >= 1")
    return ProjectionMatrix(_draw_sign_matrix(rng.generator(), n_features, proj_dim))


def _draw_sign_matrix(gen: np.random.Generator, d: int, k: int) -> np.ndarray:
    return gen.integers(-1, 2, size=(d, k)).astype(float)


def symmetric_gaussian(gen: np.random.Generator, size: int, sigma: float) -> np.ndarray:
    """Symmetric matrix: i.i.d. N(0, sigma^2) upper triangle mirrored below.

    The mirror copies the identical floats, so the result is symmetric at
    the bit level, not merely within rounding.
    """
    upper = np.triu_indices(size)
    mat = np.zeros((size, size))
    mat[upper] = gen.normal(0.0, sigma, size=len(upper[0]))
    return np.triu(mat) + np.triu(mat, 1).T


@dataclass(frozen=True)
class PrivatizationOutput:
    """Release plus the certificate of the guarantee it carries."""

    x_priv: RecordMatrix
    budget: SplitBudget
    classic_equivalent: ClassicEquivalent
    sigma_projection: float
    sigma_covariance: float
    partition_count: int = 1
    insecure: bool = False  # zero-noise test hook was used; not a release
    diagnostics: dict = field(default_factory=dict, repr=False)

    def certificate(self) -> dict:
        total = self.budget.composed()
        return {
            "B": self.budget.similarity_bound,
            "epsilon1": self.budget.epsilon1,
            "delta1": self.budget.delta1,
            "epsilon2": self.budget.epsilon2,
            "delta2": self.budget.delta2,
            "k": self.budget.proj_dim,
            "epsilon_total": total.epsilon,
            "delta_total": total.delta,
            "classic_equivalent": {
                "steps": self.classic_equivalent.steps,
                "epsilon": self.classic_equivalent.epsilon,
                "delta": self.classic_equivalent.delta,
            },
            "sigma_projection": self.sigma_projection,
            "sigma_covariance": self.sigma_covariance,
            "partitions": self.partition_count,
            "insecure": self.insecure,
        }


def _require_zero_noise_enabled():
    if not os.environ.get(_UNSAFE_ENV):
        raise RuntimeError(
            "zero-noise mode is a test hook; set "
            f"{_UNSAFE_ENV}=1 to enable it (the output carries no privacy)"
        )


def privatize(
    X,
    budget: SplitBudget,
    rng: RandomSource,
    *,
    zero_noise: bool = False,
    capture: bool = False,
) -> PrivatizationOutput:
    """Run the full release pipeline on one matrix.

    ``zero_noise`` disables both Gaussian perturbations (reconstruction
    oracle for tests; gated behind the TDP_UNSAFE_ZERO_NOISE environment
    variable and flagged ``insecure`` in the certificate). ``capture``
    stores the intermediate matrices in ``diagnostics`` for audits.
    """
    values = as_matrix(X)
    x_priv, diag = privatize_values(
        values, budget, rng.generator(), zero_noise=zero_noise, capture=capture
    )
    return PrivatizationOutput(
        x_priv=RecordMatrix(x_priv),
        budget=budget,
        classic_equivalent=to_classic_dp(budget.composed()),
        sigma_projection=0.0 if zero_noise else projection_sigma(budget, values.shape[1]),
        sigma_covariance=0.0 if zero_noise else covariance_sigma(budget),
        partition_count=1,
        insecure=zero_noise,
        diagnostics=diag,
    )


def privatize_values(values, budget, gen, *, zero_noise=False, capture=False):
    """Generator-level pipeline core: returns ``(x_priv, diagnostics)``.

    This is the callable audits replay (Kerckhoffs: the attack gets the
    exact algorithm); :func:`privatize` wraps it with the certificate.
    """
    values = as_matrix(values)
    n, d = values.shape
    k = budget.proj_dim
    if k < d:
        raise ShapeMismatch(f"proj_dim must be >= feature count ({k} < {d})")
    if not validate_l2_ball(values):
        raise ValueError("rows must lie in the unit L2 ball; clip before privatizing")
    if zero_noise:
        _require_zero_noise_enabled()

    # Draw order is fixed (sign matrix, projection noise, Gram noise) so a
    # seeded run is bit-reproducible.
    sign = _draw_sign_matrix(gen, d, k)
    projected = (values @ sign) / k
    if zero_noise:
        noisy_proj = projected.copy()
    else:
        noisy_proj = projected + gen.normal(
            0.0, projection_sigma(budget, d), size=(n, k)
        )

    gram = values.T @ values
    if zero_noise:
        noisy_gram = gram.copy()
    else:
        noisy_gram = gram + symmetric_gaussian(gen, d, covariance_sigma(budget))

    basis_t = np.linalg.svd(noisy_gram)[2]  # right singular vectors, as rows

    recovery = basis_t @ sign  # d x k
    u, s, vt = np.linalg.svd(recovery, full_matrices=False)
    cutoff = max(recovery.shape) * np.finfo(float).eps * s[0]
    rank = int((s > cutoff).sum())
    if rank < d:
        raise RankDeficientProjection(
            f"recovery map has numerical rank {rank} < {d}; resample the projection"
        )
    pinv = (vt.T / s) @ u.T
    x_priv = (noisy_proj @ pinv) @ basis_t

    diag = {}
    if capture:
        diag = {
            "sign_matrix": sign,
            "projected": projected,
            "noisy_projection": noisy_proj,
            "gram": gram,
            "noisy_gram": noisy_gram,
        }
    return x_priv, diag


def partition_rows(n: int, partitions: int, gen: np.random.Generator) -> list[np.ndarray]:
    """Random disjoint row groups covering range(n), sizes differing by <= 1."""
    if partitions < 1:
        raise ValueError("partitions must be >= 1")
    if n < partitions:
        raise TooFewRows(f"cannot split {n} rows into {partitions} partitions")
    return np.array_split(gen.permutation(n), partitions)


def privatize_values_partitioned(
    values, base_budget: BaseBudget, partitions: int, gen: np.random.Generator,
    *, zero_noise: bool = False,
) -> tuple[np.ndarray, SplitBudget]:
    """Generator-level partitioned pipeline; returns ``(x_priv, budget used)``.

    Deltas are derived from the size of the matrix actually received, so the
    same callable stays correctly calibrated when audits replay it on
    working subsets.
    """
    values = as_matrix(values)
    n = values.shape[0]
    budget = base_budget.with_deltas(n, partitions)

    children = gen.spawn(partitions + 1)
    groups = partition_rows(n, partitions, children[0])

    out = np.empty_like(values)
    for p, idx in enumerate(groups):
        block, _ = privatize_values(
            values[idx], budget, children[p + 1], zero_noise=zero_noise
        )
        out[idx] = block
    return out, budget


def privatize_partitioned(
    X,
    base_budget: BaseBudget,
    rng: RandomSource,
    partitions: int = 6,
    *,
    zero_noise: bool = False,
) -> PrivatizationOutput:
    """Privatize disjoint row blocks independently and reassemble.

    Each block gets deltas from :func:`delta_convention` (driven by the
    block size ceil(n/partitions)), a fresh random stream, and its rows are
    written back in the original order. Because the blocks are disjoint the
    parallel-composition guarantee equals the per-block guarantee, while the
    larger per-block delta lowers both noise scales.
    """
    values = as_matrix(X)
    out, budget = privatize_values_partitioned(
        values, base_budget, partitions, rng.generator(), zero_noise=zero_noise
    )
    return PrivatizationOutput(
        x_priv=RecordMatrix(out),
        budget=budget,
        classic_equivalent=to_classic_dp(budget.composed()),
        sigma_projection=0.0 if zero_noise else projection_sigma(budget, values.shape[1]),
        sigma_covariance=0.0 if zero_noise else covariance_sigma(budget),
        partition_count=partitions,
        insecure=zero_noise,
    )


def projection_privatizer(
    budget: SplitBudget, *, zero_noise: bool = False, descale: bool = False
):
    """Attack-facing callable running the single-block pipeline at a fixed budget.

    ``descale`` multiplies the release by proj_dim, undoing the pipeline's
    known deterministic 1/proj_dim output scale. Audits should enable it: an
    adversary who knows the algorithm normalizes the release back onto the
    original scale before attacking (and as deterministic post-processing it
    costs no privacy).
    """

    def run(values: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        out = privatize_values(values, budget, gen, zero_noise=zero_noise)[0]
        return budget.proj_dim * out if descale else out

    return run


def partitioned_privatizer(
    base_budget: BaseBudget,
    partitions: int,
    *,
    zero_noise: bool = False,
    descale: bool = False,
):
    """Attack-facing callable running the partitioned pipeline.

    Deltas re-derive from each input's row count, mirroring deployment.
    ``descale`` as in :func:`projection_privatizer`.
    """

    def run(values: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        out = privatize_values_partitioned(
            values, base_budget, partitions, gen, zero_noise=zero_noise
        )[0]
        return base_budget.proj_dim * out if descale else out

    return run
