"""Shared fixtures: the logistic worked example used throughout the tests.

The example is a two-parameter fit on the linear-predictor scale with a
plug-in covariance (known scale, infinite degrees of freedom) over the
box K = [-2.30, -0.05]. Its one- and two-sided multipliers at alpha =
0.05 are close to 2.14 and 2.42, and the four sets at threshold 0 are
intervals ending at -0.05.
"""
import math

import numpy as np
import pytest

from levelband import (BandSpec, BasisMap, BoxRegion, CriticalConstant,
                       MonteCarloConfig, RegressionFit, critical_constant)

EX_BETA = np.array([3.124, 2.128])
EX_COV = np.array([[0.1122, 0.0679],
                   [0.0679, 0.0490]])
EX_LOWER, EX_UPPER = -2.30, -0.05
EX_LAMBDA = 0.0
EX_ALPHA = 0.05


@pytest.fixture(scope="session")
def ex_region():
    return BoxRegion(np.array([EX_LOWER]), np.array([EX_UPPER]))


@pytest.fixture(scope="session")
def ex_fit():
    return RegressionFit(EX_BETA, 1.0, math.inf, EX_COV, BasisMap("affine"))


@pytest.fixture(scope="session")
def ex_config():
    return MonteCarloConfig(draws=50_000, seed=7)


@pytest.fixture(scope="session")
def ex_c1(ex_fit, ex_region, ex_config):
    spec = BandSpec("upper", "hyperbolic", EX_ALPHA, ex_region)
    return critical_constant(ex_fit, spec, ex_config)


@pytest.fixture(scope="session")
def ex_c2(ex_fit, ex_region, ex_config):
    spec = BandSpec("two-sided", "hyperbolic", EX_ALPHA, ex_region)
    return critical_constant(ex_fit, spec, ex_config)


def injected_constant(value, side, region, alpha=EX_ALPHA,
                      shape="hyperbolic"):
    """Constant with a hand-picked value, for endpoint pinning tests."""
    spec = BandSpec(side, shape, alpha, region)
    return CriticalConstant(value, 0.0, spec, MonteCarloConfig(draws=1))


# verdict lines recorded by the acceptance tests, echoed after the run so
# they are visible even when pytest captures per-test stdout
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
