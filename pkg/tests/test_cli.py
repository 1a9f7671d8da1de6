"""End-to-end command-line checks: outputs, caching, determinism, exits."""
import json
import math

import numpy as np
import pytest

from levelband import band_at
from levelband.cli import main, parse_region

from conftest import injected_constant

EX_BETA_ARG = "3.124,2.128"
EX_COV_ARG = "0.1122,0.0679,0.0679,0.0490"
EX_REGION_ARG = "-2.30:-0.05"
REPORTED = {"G1u": -1.61, "G1l": -1.33, "G2l": -1.32, "G2u": -1.64}


def _write_data_csv(path, seed=0, n=30):
    rng = np.random.default_rng(seed)
    x = np.linspace(-2.0, 2.0, n)
    y = 1.0 + 0.8 * x + 0.3 * rng.standard_normal(n)
    lines = ["y,x"] + [f"{float(a)!r},{float(b)!r}" for a, b in zip(y, x)]
    path.write_text("\n".join(lines) + "\n")
    return path


def _glm_args(out, extra=()):
    return ["glm-levelset",
            "--beta", EX_BETA_ARG, "--cov", EX_COV_ARG,
            f"--region={EX_REGION_ARG}", "--alpha", "0.05",
            "--threshold-mean", "0.5", "--link", "logit",
            "--draws", "50000", "--seed", "7",
            "--out", str(out), *extra]


def test_parse_region():
    region = parse_region("0:1,-2:3")
    assert region.lower.tolist() == [0.0, -2.0]
    assert region.upper.tolist() == [1.0, 3.0]


def test_glm_levelset_reproduces_published_intervals(tmp_path):
    assert main(_glm_args(tmp_path)) == 0
    results = json.loads((tmp_path / "results.json").read_text())
    assert results["schema_version"] == 1
    assert results["link"]["lambda"] == pytest.approx(0.0)
    for kind, left in REPORTED.items():
        (a, b), = results["sets"][kind]["intervals"]
        assert a == pytest.approx(left, abs=0.02)
        assert b == pytest.approx(-0.05, abs=1e-9)
        assert results["sets"][kind]["approximate"] is True
    for name in ("bands.csv", "plot.svg"):
        assert (tmp_path / name).exists()


def test_levelset_empty_set_is_not_an_error(tmp_path):
    data = _write_data_csv(tmp_path / "obs.csv")
    code = main(["levelset", "--data", str(data), "--response", "y",
                 "--covariates", "x", "--region=-2:2",
                 "--lambda", "1e12", "--draws", "5000", "--seed", "1",
                 "--out", str(tmp_path / "out")])
    assert code == 0
    results = json.loads((tmp_path / "out" / "results.json").read_text())
    for kind in ("G1u", "G1l", "G2u", "G2l"):
        assert results["sets"][kind]["is_empty"] is True
        assert results["sets"][kind]["intervals"] == []


def test_fit_subcommand(tmp_path):
    data = _write_data_csv(tmp_path / "obs.csv")
    assert main(["fit", "--data", str(data), "--response", "y",
                 "--covariates", "x", "--out", str(tmp_path)]) == 0
    results = json.loads((tmp_path / "results.json").read_text())
    assert results["fit"]["beta_hat"][1] == pytest.approx(0.8, abs=0.1)
    assert results["fit"]["dof"] == 28.0


def test_band_subcommand_plugin_input(tmp_path):
    code = main(["band", "--beta", EX_BETA_ARG, "--cov", EX_COV_ARG,
                 f"--region={EX_REGION_ARG}", "--side", "two-sided",
                 "--draws", "20000", "--seed", "2",
                 "--out", str(tmp_path)])
    assert code == 0
    results = json.loads((tmp_path / "results.json").read_text())
    assert results["critical_constant"]["value"] == pytest.approx(2.42,
                                                                  abs=0.05)
    assert (tmp_path / "bands.csv").exists()


def test_bands_csv_matches_band_at(tmp_path):
    assert main(_glm_args(tmp_path)) == 0
    results = json.loads((tmp_path / "results.json").read_text())
    from levelband import BasisMap, BoxRegion, RegressionFit
    fit = RegressionFit(np.array(results["fit"]["beta_hat"]), 1.0, math.inf,
                        np.array(results["fit"]["xtx_inv"]),
                        BasisMap("affine"))
    lines = (tmp_path / "bands.csv").read_text().strip().split("\n")
    header = lines[0].split(",")
    region = parse_region(EX_REGION_ARG)
    labels = sorted({h.rsplit("_", 1)[0] for h in header[2:]})
    constants = {lab: injected_constant(
        results["critical_constants"][lab]["value"], lab, region)
        for lab in labels}
    for line in lines[1:None:17]:
        cells = line.split(",")
        x = float(cells[0])
        assert cells[1] == f"{fit.estimate_at(x):.12g}"
        for j, lab in enumerate(header[2::2]):
            lab = lab.rsplit("_", 1)[0]
            lo, hi = band_at(fit, constants[lab], x)
            assert cells[2 + 2 * j] == f"{lo:.12g}"
            assert cells[3 + 2 * j] == f"{hi:.12g}"


def test_repeated_runs_are_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(_glm_args(out1)) == 0
    assert main(_glm_args(out2)) == 0
    for name in ("results.json", "bands.csv", "plot.svg"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), name


def test_cache_hit_is_trusted(tmp_path):
    cache_dir = tmp_path / "cache"
    out1 = tmp_path / "a"
    args = ["critconst", "--beta", EX_BETA_ARG, "--cov", EX_COV_ARG,
            f"--region={EX_REGION_ARG}", "--side", "upper",
            "--draws", "20000", "--seed", "4",
            "--cache-dir", str(cache_dir)]
    assert main([*args, "--out", str(out1)]) == 0
    value = json.loads(
        (out1 / "results.json").read_text())["critical_constant"]["value"]

    # plant a sentinel value in the entry; a true cache hit must return it
    entries = sorted(cache_dir.glob("*.json"))
    assert len(entries) == 1
    entry = json.loads(entries[0].read_text())
    entry["value"] = 9.25
    import hashlib
    body = {k: v for k, v in entry.items() if k != "checksum"}
    entry["checksum"] = hashlib.sha256(
        json.dumps(body, sort_keys=True).encode()).hexdigest()
    entries[0].write_text(json.dumps(entry, sort_keys=True))
    out2 = tmp_path / "b"
    assert main([*args, "--out", str(out2)]) == 0
    got = json.loads(
        (out2 / "results.json").read_text())["critical_constant"]["value"]
    assert got == 9.25

    # a corrupt checksum must be ignored and the constant recomputed
    entry["value"] = 8.5
    entries[0].write_text(json.dumps(entry, sort_keys=True))
    out3 = tmp_path / "c"
    assert main([*args, "--out", str(out3)]) == 0
    got = json.loads(
        (out3 / "results.json").read_text())["critical_constant"]["value"]
    assert got == value


def test_cache_misses_on_changed_alpha(tmp_path):
    cache_dir = tmp_path / "cache"
    base = ["critconst", "--beta", EX_BETA_ARG, "--cov", EX_COV_ARG,
            f"--region={EX_REGION_ARG}", "--side", "upper",
            "--draws", "5000", "--seed", "4",
            "--cache-dir", str(cache_dir)]
    assert main([*base, "--alpha", "0.05", "--out", str(tmp_path / "a")]) == 0
    assert main([*base, "--alpha", "0.10", "--out", str(tmp_path / "b")]) == 0
    assert len(list(cache_dir.glob("*.json"))) == 2


def test_contradictory_threshold_flags_exit_2(tmp_path):
    code = main(["glm-levelset", "--beta", EX_BETA_ARG, "--cov", EX_COV_ARG,
                 f"--region={EX_REGION_ARG}", "--lambda", "0.0",
                 "--threshold-mean", "0.5", "--link", "logit",
                 "--out", str(tmp_path)])
    assert code == 2


def test_missing_csv_exits_2(tmp_path):
    code = main(["fit", "--data", str(tmp_path / "nope.csv"),
                 "--response", "y", "--covariates", "x",
                 "--out", str(tmp_path)])
    assert code == 2


def test_indefinite_covariance_exits_3(tmp_path):
    code = main(["critconst", "--beta", "0,0",
                 "--cov", "1,2,2,1", "--region", "0:1",
                 "--draws", "1000", "--seed", "0",
                 "--out", str(tmp_path)])
    assert code == 3


def test_empty_region_exits_3(tmp_path):
    code = main(["critconst", "--beta", EX_BETA_ARG, "--cov", EX_COV_ARG,
                 "--region", "1:0", "--draws", "1000", "--seed", "0",
                 "--out", str(tmp_path)])
    assert code == 3


def test_coverage_cli_matches_library(tmp_path):
    ini = tmp_path / "scenario.ini"
    ini.write_text("""\
[model]
true_beta = 0.0, 0.0
true_sigma = 1.0
design = linspace
n = 20

[region]
lower = 0.0
upper = 1.0

[study]
lambda = 0.0
alpha = 0.05
replications = 400
seed = 17
event = G_subset_G1u

[montecarlo]
draws = 20000
seed = 3
""")
    out = tmp_path / "out"
    assert main(["coverage", "--scenario", str(ini),
                 "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    from levelband import run_coverage
    from levelband.coverage import scenario_from_ini
    scen, event = scenario_from_ini(ini)
    direct = run_coverage(scen, event)
    assert report["reports"][0]["hit_rate"] == direct.hit_rate
    assert report["reports"][0]["event"] == "G_subset_G1u"
    assert (out / "report.txt").read_text().count("G_subset_G1u") == 1
