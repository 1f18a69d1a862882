"""Targeted differential privacy toolkit.

Budget calculus for targeted privacy guarantees, a private projection
release pipeline, a k-anonymity baseline, an attack audit suite, and a
targeting-evaluation harness with a parameter-sweep runner.
"""

__version__ = "0.1.0"

from .budgets import (  # noqa: F401
    AccuracyRequirement,
    ClassicEquivalent,
    SplitBudget,
    TdpBudget,
    accuracy_odds,
    compose_parallel,
    compose_sequential,
    max_feasible_bound,
    targeting_feasible,
    to_classic_dp,
)
from .data import (  # noqa: F401
    PreprocessReport,
    RecordMatrix,
    TargetVector,
    clip_rows_to_unit_ball,
    cumulative_distance,
    preprocess,
    scale_target_unit_interval,
    standardize_columns,
    validate_l2_ball,
)
from .projection import (  # noqa: F401
    BaseBudget,
    PrivatizationOutput,
    ProjectionMatrix,
    covariance_sigma,
    delta_convention,
    privatize,
    privatize_partitioned,
    projection_sigma,
    sample_projection,
)
from .rng import RandomSource  # noqa: F401
