"""Exact-level confidence sets for regression level sets.

Upper, lower, and two-sided confidence sets for the covariate region
where a linear (or linear-predictor) regression function exceeds a
threshold, built from Monte Carlo-calibrated simultaneous confidence
bands over a box-shaped covariate region.
"""
from .bands import BandSpec, CriticalConstant, MonteCarloConfig, band_at, \
    critical_constant, quantile_with_se, simulate_pivots, sup_ratio
from .coverage import CoverageReport, CoverageScenario, run_coverage, \
    run_least_favorable_sweep
from .errors import DimensionMismatch, EmptyRegion, KindMismatch, \
    LevelBandError, MismatchedProblems, NotPositiveDefinite, RankDeficient, \
    SampleTooSmall
from .model import BasisMap, BoxRegion, Dataset, RegressionFit, \
    band_width_factor, band_width_many, expand_basis, fit_ols, \
    load_dataset_csv
from .sets import LevelSetEstimate, LinkAdapter, confidence_set, \
    glm_confidence_set, nesting_check, sublevel_set

__version__ = "0.1.0"

__all__ = [
    "BandSpec", "BasisMap", "BoxRegion", "CoverageReport",
    "CoverageScenario", "CriticalConstant", "Dataset", "DimensionMismatch",
    "EmptyRegion", "KindMismatch", "LevelBandError", "LevelSetEstimate",
    "LinkAdapter", "MismatchedProblems", "MonteCarloConfig",
    "NotPositiveDefinite", "RankDeficient", "RegressionFit",
    "SampleTooSmall", "band_at", "band_width_factor", "band_width_many",
    "confidence_set", "critical_constant", "expand_basis", "fit_ols",
    "glm_confidence_set", "load_dataset_csv", "nesting_check",
    "quantile_with_se", "run_coverage", "run_least_favorable_sweep",
    "simulate_pivots", "sublevel_set", "sup_ratio",
]
