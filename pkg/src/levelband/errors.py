"""Exception types shared across the package."""


class LevelBandError(Exception):
    """Base class for all levelband errors."""


class SampleTooSmall(LevelBandError):
    """Not enough observations to estimate both coefficients and variance."""


class RankDeficient(LevelBandError):
    """Design matrix is numerically rank deficient; model unidentifiable."""


class DimensionMismatch(LevelBandError):
    """Covariate point, basis, or matrix dimensions do not agree."""


class EmptyRegion(LevelBandError):
    """Covariate box is empty (some lower bound exceeds its upper bound)."""


class NotPositiveDefinite(LevelBandError):
    """A matrix required to be SPD failed its Cholesky factorization."""


class KindMismatch(LevelBandError):
    """Critical constant side is inconsistent with the requested set kind."""


class MismatchedProblems(LevelBandError):
    """Level-set estimates passed together do not share the same problem."""
