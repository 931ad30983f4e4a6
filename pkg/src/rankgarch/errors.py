"""Exception types shared across the package."""


class RankGarchError(Exception):
    """Base class for all rankgarch errors."""


class NonPositiveParameter(RankGarchError):
    """A parameter component that must be strictly positive is not."""


class NonStationary(RankGarchError):
    """Parameter point violates a (required) stationarity condition."""


class DimensionMismatch(RankGarchError):
    """Parameter vector length does not match the model orders."""


class UnsupportedSpec(RankGarchError):
    """Operation only defined for a restricted model shape."""


class NonPositiveVariance(RankGarchError):
    """Filtered variance failed to stay positive (should be impossible for valid input)."""


class NonFiniteInput(RankGarchError):
    """Input data contains NaN or infinite values."""


class DomainError(RankGarchError):
    """Argument outside the mathematical domain of the function."""


class SingularInformation(RankGarchError):
    """Information-type matrix is singular or too ill-conditioned to invert."""


class NonFiniteStep(RankGarchError):
    """A Newton-type update produced NaN or infinite components."""


class InitFailed(RankGarchError):
    """No initial estimator could be computed."""


class OptimFailed(RankGarchError):
    """Numerical optimizer crashed or returned unusable output."""


class DegenerateSeries(RankGarchError):
    """Input series carries no usable variation (e.g. all zeros)."""


class ExplosiveBeta(RankGarchError):
    """Sum of GARCH-lag coefficients is >= 1 where a finite mean is needed."""


class InvalidDf(RankGarchError):
    """Degrees of freedom too small for the required moments."""


class InsufficientReplicates(RankGarchError):
    """Too few bootstrap replicates for the requested summary."""


class ExcessiveFailures(RankGarchError):
    """More than the tolerated share of bootstrap replicates failed."""


class QuadratureNotConverged(RankGarchError):
    """Numerical integration error estimate exceeds the tolerance."""


class AllReplicationsFailed(RankGarchError):
    """Every Monte Carlo replication failed; nothing to aggregate."""


class InfiniteFourthMoment(RankGarchError):
    """Distribution lacks the finite fourth moment the calculation needs."""


class InputFormatError(RankGarchError):
    """Malformed input file (CSV ingestion)."""
