"""Coverage simulation: exactness at the least favorable truth and the
two-sided lower bound."""
import math

import numpy as np
import pytest

from levelband import (BasisMap, BoxRegion, CoverageScenario,
                       MonteCarloConfig, run_coverage,
                       run_least_favorable_sweep)
from levelband.coverage import (event_hits, replication_estimates,
                                report_table, scenario_constant,
                                scenario_from_ini)


def _scenario(beta, lam=0.0, replications=2_000, seed=101, draws=50_000):
    region = BoxRegion(np.array([0.0]), np.array([1.0]))
    return CoverageScenario(
        true_beta=np.asarray(beta, dtype=float),
        true_sigma=1.0,
        covariates=np.linspace(0.0, 1.0, 20)[:, None],
        basis=BasisMap("affine"),
        region=region,
        lam=lam,
        alpha=0.05,
        replications=replications,
        seed=seed,
        mc=MonteCarloConfig(draws=draws, seed=3),
    )


def test_single_replication_hit_is_binary():
    scen = _scenario([0.0, 0.0], replications=1)
    report = run_coverage(scen, "G_subset_G1u")
    assert report.hit_rate in (0.0, 1.0)
    assert report.mc_std_error == 0.0


def test_flat_truth_upper_coverage_is_exact():
    # beta = (lambda, 0) is the least favorable truth: coverage should sit
    # at 0.95, not above it
    scen = _scenario([0.0, 0.0])
    report = run_coverage(scen, "G_subset_G1u")
    assert report.hit_rate == pytest.approx(0.95, abs=0.02)


def test_just_below_threshold_lower_coverage_is_exact():
    lam_minus = -1e-9
    scen = _scenario([lam_minus, 0.0])
    report = run_coverage(scen, "G1l_subset_G")
    assert report.hit_rate == pytest.approx(0.95, abs=0.02)


def test_steep_truth_covers_conservatively():
    scen = _scenario([0.0, 25.0], replications=500)
    report = run_coverage(scen, "G_subset_G1u")
    assert report.hit_rate >= 0.95 - 0.03


def test_sandwich_sweep_meets_lower_bound():
    base = _scenario([0.0, 0.0], replications=1_000)
    reports = run_least_favorable_sweep(base)
    assert len(reports) == 5
    for r in reports:
        assert r.event == "two_sided_sandwich"
        assert r.hit_rate >= 0.95 - 0.03


def test_flat_hits_equal_band_exceedance():
    # for the flat truth the set-containment event is exactly the event
    # that the upper band clears the threshold everywhere on the probe grid
    scen = _scenario([0.0, 0.0], replications=200)
    c1 = scenario_constant(scen, "upper")
    hits = event_hits(scen, "G_subset_G1u", c1)
    betas, sigmas = replication_estimates(scen)
    probe = scen.region.grid_points(scen.containment_grid)
    Xp = scen.basis.expand_many(probe)
    from levelband.coverage import geometry_fit
    geom = geometry_fit(scen)
    m = np.sqrt(np.einsum("ij,jk,ik->i", Xp, geom.xtx_inv, Xp))
    manual = np.empty(200, dtype=bool)
    for r in range(200):
        band_hi = Xp @ betas[r] + c1.value * sigmas[r] * m
        manual[r] = bool(np.all(band_hi >= scen.lam))
    assert np.array_equal(hits, manual)


def test_hits_monotone_in_constant():
    from dataclasses import replace
    scen = _scenario([0.0, 0.5], replications=300)
    c = scenario_constant(scen, "upper")
    wide = replace(c, value=1.25 * c.value)
    hits = event_hits(scen, "G_subset_G1u", c)
    hits_wide = event_hits(scen, "G_subset_G1u", wide)
    assert not np.any(hits & ~hits_wide)


def test_replications_are_pure_functions_of_seed():
    short = replication_estimates(_scenario([0.0, 1.0], replications=50))
    long = replication_estimates(_scenario([0.0, 1.0], replications=120))
    assert np.array_equal(short[0], long[0][:50])
    assert np.array_equal(short[1], long[1][:50])


def test_report_is_reproducible():
    scen = _scenario([0.0, 0.0], replications=300)
    a = run_coverage(scen, "G_subset_G1u")
    b = run_coverage(scen, "G_subset_G1u")
    assert a == b
    assert a.scenario_fingerprint == scen.fingerprint()


def test_event_name_validated():
    scen = _scenario([0.0, 0.0], replications=5)
    with pytest.raises(ValueError):
        event_hits(scen, "nonsense")
    c1 = scenario_constant(scen, "upper")
    with pytest.raises(ValueError):
        event_hits(scen, "G1l_subset_G", c1)


def test_report_table_format():
    scen = _scenario([0.0, 0.0], replications=100)
    reports = [run_coverage(scen, "G_subset_G1u")]
    table = report_table(reports)
    assert "G_subset_G1u" in table
    assert f"{reports[0].hit_rate:.4f}" in table


def test_scenario_from_ini_roundtrip(tmp_path):
    text = """\
[model]
true_beta = 0.0, 0.0
true_sigma = 1.0
basis = affine
design = linspace
n = 20

[region]
lower = 0.0
upper = 1.0

[study]
lambda = 0.0
alpha = 0.05
replications = 2000
seed = 101
event = G_subset_G1u

[montecarlo]
draws = 50000
seed = 3
"""
    path = tmp_path / "scenario.ini"
    path.write_text(text)
    scen, event = scenario_from_ini(path)
    assert event == "G_subset_G1u"
    assert scen.fingerprint() == _scenario([0.0, 0.0]).fingerprint()
    assert run_coverage(scen, event) == \
        run_coverage(_scenario([0.0, 0.0]), "G_subset_G1u")


def test_scenario_validation():
    with pytest.raises(ValueError):
        _scenario([0.0, 0.0], replications=0)
    with pytest.raises(ValueError):
        CoverageScenario(
            true_beta=np.zeros(2), true_sigma=1.0,
            covariates=np.zeros((2, 1)), basis=BasisMap("affine"),
            region=BoxRegion(np.array([0.0]), np.array([1.0])),
            lam=0.0, alpha=0.05, replications=10, seed=0)
