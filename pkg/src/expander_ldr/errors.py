"""Exception types raised by the estimator stack."""


class ParameterError(ValueError):
    """Invalid sizes, indices or configuration values."""


class EmptyBucketError(ValueError):
    """A statistic was requested for a bucket with no rows."""


class AggregationError(ValueError):
    """Robust aggregation was asked to reduce an empty collection."""


class IndefiniteMomentsError(ArithmeticError):
    """``sigma_hat + lambda * I`` could not be Cholesky-factorized."""


class DegenerateStateError(RuntimeError):
    """Spectral filtering pruned every active bucket."""


class SingularDesignError(ArithmeticError):
    """A normal-equation system of a baseline fit is singular."""


class ConsensusError(RuntimeError):
    """RANSAC found no consensus set of the required size."""
