"""Exception types shared across the package."""


class TdpError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(TdpError, ValueError):
    """Operands have incompatible shapes."""


class ZeroVarianceColumn(TdpError, ValueError):
    """A feature column is (near-)constant and cannot be standardized.

    Carries the offending column index; callers must drop or impute the
    column themselves. Silent drops are forbidden because the feature count
    enters the privacy noise calibration.
    """

    def __init__(self, column: int):
        self.column = column
        super().__init__(f"column {column} has zero variance")


class DegenerateRange(TdpError, ValueError):
    """A regression target has max == min and cannot be min-max scaled."""


class TooFewRows(TdpError, ValueError):
    """Fewer rows than the operation requires."""


class RankDeficientProjection(TdpError, RuntimeError):
    """The recovery map lost full column rank; output would be meaningless."""


class SingularSystem(TdpError, ValueError):
    """Unregularized least squares on a rank-deficient design matrix."""


class NonConvergence(TdpError, RuntimeError):
    """Iterative solver exhausted its iteration budget."""


class HoldoutTooLarge(TdpError, ValueError):
    """Requested holdout size leaves no working rows."""


class MissingLedgerEntry(TdpError, ValueError):
    """Loan ledger does not cover every applicant."""


class MomentMatchFailure(TdpError, RuntimeError):
    """Synthetic generator could not hit the requested moments."""


class ZeroBaseline(TdpError, ValueError):
    """Relative change against a zero baseline is undefined."""


class InvalidConfig(TdpError, ValueError):
    """Experiment configuration failed validation."""
