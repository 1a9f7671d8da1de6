"""Command-line front end.

Subcommands: fit, critconst, band, levelset, glm-levelset, coverage.
Every run writes results.json into the output directory; band and set
runs additionally write bands.csv and plot.svg. Outputs carry the seed
and draw count so Monte Carlo numbers are auditable, and repeated runs
with the same seed are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import cache
from .bands import BandSpec, CriticalConstant, MonteCarloConfig, band_at, \
    critical_constant, with_spec
from .coverage import report_table, run_coverage, run_least_favorable_sweep, \
    scenario_from_ini
from .errors import DimensionMismatch, EmptyRegion, KindMismatch, \
    LevelBandError, MismatchedProblems, NotPositiveDefinite, RankDeficient, \
    SampleTooSmall
from .model import BasisMap, BoxRegion, RegressionFit, fit_ols, \
    load_dataset_csv
from .sets import KINDS, LinkAdapter, confidence_set, glm_confidence_set, \
    sublevel_set

SCHEMA_VERSION = 1

_VALIDATION_ERRORS = (ValueError, KeyError, FileNotFoundError, OSError,
                      DimensionMismatch, KindMismatch, MismatchedProblems)
_NUMERICAL_ERRORS = (RankDeficient, SampleTooSmall, EmptyRegion,
                     NotPositiveDefinite, np.linalg.LinAlgError)

_LINKS = {
    # name -> (lambda = L(L0), direction)
    "logit": (lambda p: math.log(p / (1.0 - p)), "increasing"),
    "log": (math.log, "increasing"),
    "identity": (lambda v: v, "increasing"),
    "loglog": (lambda p: math.log(-math.log(p)), "decreasing"),
}


def _parse_floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip() != ""]


def parse_region(text: str) -> BoxRegion:
    """'lo:hi' per coordinate, comma separated, e.g. '92:149,2:5'."""
    lows, highs = [], []
    for part in text.split(","):
        lo, _, hi = part.partition(":")
        lows.append(float(lo))
        highs.append(float(hi))
    return BoxRegion(np.array(lows), np.array(highs))


def _mc_from_args(args) -> MonteCarloConfig:
    return MonteCarloConfig(draws=args.draws, seed=args.seed,
                            workers=args.workers,
                            grid_points_per_dim=args.grid,
                            refine_iterations=args.refine)


def _add_mc_args(p):
    p.add_argument("--draws", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--grid", type=int, default=None,
                   help="inner-maximization grid points per dimension")
    p.add_argument("--refine", type=int, default=40,
                   help="golden-section refinement iterations")


def _add_data_args(p):
    p.add_argument("--data", required=True, help="CSV with a header row")
    p.add_argument("--response", required=True)
    p.add_argument("--covariates", required=True,
                   help="comma-separated covariate column names")
    p.add_argument("--basis", choices=["affine", "polynomial"],
                   default="affine")
    p.add_argument("--degree", type=int, default=None)


def _add_out_args(p):
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--cache-dir", default=None,
                   help="critical-constant cache directory")


def _fit_from_args(args) -> RegressionFit:
    basis = BasisMap(args.basis, args.degree)
    data = load_dataset_csv(args.data, args.response,
                            args.covariates.split(","))
    return fit_ols(data, basis)


def _write_json(outdir: Path, payload: dict, name="results.json") -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    path = outdir / name
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


def _fit_dict(fit: RegressionFit) -> dict:
    return {
        "beta_hat": fit.beta_hat.tolist(),
        "sigma_hat_sq": fit.sigma_hat_sq,
        "dof": (None if math.isinf(fit.dof) else fit.dof),
        "xtx_inv": fit.xtx_inv.tolist(),
        "basis": {"kind": fit.basis.kind, "degree": fit.basis.degree},
        "n_obs": fit.n_obs,
    }


def _constant_cached(fit, spec, mc, cache_dir) -> CriticalConstant:
    if cache_dir:
        hit = cache.lookup(cache_dir, fit, spec, mc)
        if hit is not None:
            return hit
    c = critical_constant(fit, spec, mc)
    if cache_dir:
        cache.store(cache_dir, fit, c)
    return c


def _write_bands_csv(outdir: Path, fit: RegressionFit, constants: dict,
                     region: BoxRegion, points=201) -> Path:
    d = region.dim
    per_dim = points if d == 1 else max(2, int(round(points ** (1.0 / d))))
    pts = region.grid_points(per_dim)
    labels = list(constants)
    header = [f"x{i + 1}" for i in range(d)] + ["estimate"]
    for lab in labels:
        header += [f"{lab}_lower", f"{lab}_upper"]
    lines = [",".join(header)]
    for row in pts:
        cells = [f"{v:.12g}" for v in row]
        cells.append(f"{fit.estimate_at(row):.12g}")
        for lab in labels:
            lo, hi = band_at(fit, constants[lab], row)
            cells += [f"{lo:.12g}", f"{hi:.12g}"]
        lines.append(",".join(cells))
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "bands.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _render_plot(outdir: Path, fit, constants, sets, lam) -> None:
    from . import plotting
    region = sets[0].region if sets else None
    path = outdir / "plot.svg"
    if region is None or region.dim > 2:
        return
    if region.dim == 1:
        plotting.render_levelset_1d(fit, constants, sets, lam, path)
    else:
        plotting.render_levelset_2d(sets, lam, path)


def _sets_for_kinds(fit, kinds, constants_by_side, lam, sublevel,
                    approximate=False):
    build = sublevel_set if sublevel else confidence_set
    out = []
    for kind in kinds:
        side = {"G1u": "upper", "G1l": "lower",
                "G2u": "two-sided", "G2l": "two-sided"}[kind]
        out.append(build(fit, constants_by_side[side], lam, kind,
                         approximate))
    return out


def _constants_for_kinds(fit, kinds, region, alpha, shape, mc, cache_dir):
    sides = {{"G1u": "upper", "G1l": "lower", "G2u": "two-sided",
              "G2l": "two-sided"}[k] for k in kinds}
    out = {}
    if "upper" in sides or "lower" in sides:
        c_up = _constant_cached(fit, BandSpec("upper", shape, alpha, region),
                                mc, cache_dir)
        if "upper" in sides:
            out["upper"] = c_up
        if "lower" in sides:
            # one-sided pivots are sign-symmetric; reuse the same quantile
            c_lo = with_spec(c_up, side="lower")
            if cache_dir:
                cache.store(cache_dir, fit, c_lo)
            out["lower"] = c_lo
    if "two-sided" in sides:
        out["two-sided"] = _constant_cached(
            fit, BandSpec("two-sided", shape, alpha, region), mc, cache_dir)
    return out


# ---------------------------------------------------------------- commands

def _cmd_fit(args) -> int:
    fit = _fit_from_args(args)
    _write_json(Path(args.out), {"fit": _fit_dict(fit)})
    return 0


def _cmd_critconst(args) -> int:
    fit = _resolve_fit(args)
    region = parse_region(args.region)
    mc = _mc_from_args(args)
    spec = BandSpec(args.side, args.shape, args.alpha, region)
    c = _constant_cached(fit, spec, mc, args.cache_dir)
    _write_json(Path(args.out), {"fit": _fit_dict(fit),
                                 "critical_constant": c.to_json_dict()})
    return 0


def _cmd_band(args) -> int:
    fit = _resolve_fit(args)
    region = parse_region(args.region)
    mc = _mc_from_args(args)
    spec = BandSpec(args.side, args.shape, args.alpha, region)
    c = _constant_cached(fit, spec, mc, args.cache_dir)
    outdir = Path(args.out)
    _write_json(outdir, {"fit": _fit_dict(fit),
                         "critical_constant": c.to_json_dict()})
    _write_bands_csv(outdir, fit, {args.side: c}, region)
    _render_plot(outdir, fit, {args.side: c}, [], math.nan)
    return 0


def _resolve_fit(args) -> RegressionFit:
    """Fit from a CSV, or a plug-in (beta, cov) geometry when given."""
    if getattr(args, "beta", None) is not None:
        beta = np.array(_parse_floats(args.beta))
        cov_vals = _parse_floats(args.cov)
        k = beta.size
        if len(cov_vals) != k * k:
            raise ValueError("--cov must have (p+1)^2 row-major entries")
        cov = np.array(cov_vals).reshape(k, k)
        dof = math.inf if args.dof in (None, "inf") else float(args.dof)
        return RegressionFit(beta, 1.0, dof, 0.5 * (cov + cov.T),
                             BasisMap("affine"))
    return _fit_from_args(args)


def _cmd_levelset(args) -> int:
    fit = _fit_from_args(args)
    region = parse_region(args.region)
    mc = _mc_from_args(args)
    kinds = list(KINDS) if args.kind == "all" else [args.kind]
    constants = _constants_for_kinds(fit, kinds, region, args.alpha,
                                     args.shape, mc, args.cache_dir)
    sets = _sets_for_kinds(fit, kinds, constants, args.threshold,
                           args.sublevel)
    outdir = Path(args.out)
    _write_json(outdir, {
        "fit": _fit_dict(fit),
        "critical_constants": {s: c.to_json_dict()
                               for s, c in constants.items()},
        "sets": {s.kind: s.to_json_dict() for s in sets},
        "sublevel": args.sublevel,
    })
    _write_bands_csv(outdir, fit, constants, region)
    _render_plot(outdir, fit, constants, sets, args.threshold)
    return 0


def _cmd_glm_levelset(args) -> int:
    if args.threshold is not None and args.threshold_mean is not None:
        raise ValueError("--lambda and --threshold-mean are contradictory; "
                         "give exactly one")
    if args.threshold is not None:
        if args.link not in ("increasing", "decreasing"):
            raise ValueError("--lambda needs --link increasing|decreasing")
        lam, direction = args.threshold, args.link
        threshold_mean = math.nan
    elif args.threshold_mean is not None:
        if args.link not in _LINKS:
            raise ValueError(f"--threshold-mean needs --link in "
                             f"{sorted(_LINKS)}")
        fn, direction = _LINKS[args.link]
        lam = fn(args.threshold_mean)
        threshold_mean = args.threshold_mean
    else:
        raise ValueError("give --lambda or --threshold-mean")

    beta = np.array(_parse_floats(args.beta))
    cov_vals = _parse_floats(args.cov)
    k = beta.size
    if len(cov_vals) != k * k:
        raise ValueError("--cov must have (p+1)^2 row-major entries")
    cov = np.array(cov_vals).reshape(k, k)
    adapter = LinkAdapter(beta, cov, direction, threshold_mean, lam)
    region = parse_region(args.region)
    mc = _mc_from_args(args)
    fit = adapter.as_fit()
    kinds = list(KINDS) if args.kind == "all" else [args.kind]
    constants = _constants_for_kinds(fit, kinds, region, args.alpha,
                                     "hyperbolic", mc, args.cache_dir)
    sets = [glm_confidence_set(adapter, region, args.alpha, kind, mc,
                               constant=constants[
                                   {"G1u": "upper", "G1l": "lower",
                                    "G2u": "two-sided",
                                    "G2l": "two-sided"}[kind]])
            for kind in kinds]
    outdir = Path(args.out)
    _write_json(outdir, {
        "fit": _fit_dict(fit),
        "link": {"direction": direction, "lambda": lam,
                 "threshold_mean": (None if math.isnan(threshold_mean)
                                    else threshold_mean)},
        "critical_constants": {s: c.to_json_dict()
                               for s, c in constants.items()},
        "sets": {s.kind: s.to_json_dict() for s in sets},
    })
    _write_bands_csv(outdir, fit, constants, region)
    _render_plot(outdir, fit, constants, sets, lam)
    return 0


def _cmd_coverage(args) -> int:
    scenario, event = scenario_from_ini(args.scenario)
    if args.sweep:
        reports = run_least_favorable_sweep(scenario)
    else:
        events = [event] if event else \
            ["G_subset_G1u", "G1l_subset_G", "two_sided_sandwich"]
        reports = [run_coverage(scenario, e) for e in events]
    outdir = Path(args.out)
    _write_json(outdir, {"reports": [r.to_json_dict() for r in reports]},
                name="report.json")
    (outdir / "report.txt").write_text(report_table(reports) + "\n",
                                       encoding="utf-8")
    print(report_table(reports))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levelband",
        description="Confidence sets for regression level sets via "
                    "simultaneous confidence bands.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("fit", help="OLS fit summary from a CSV")
    _add_data_args(p)
    _add_out_args(p)
    p.set_defaults(func=_cmd_fit)

    for name, func, needs_side in (("critconst", _cmd_critconst, True),
                                   ("band", _cmd_band, True)):
        p = sub.add_parser(name)
        grp = p.add_argument_group("model input")
        grp.add_argument("--data")
        grp.add_argument("--response")
        grp.add_argument("--covariates")
        grp.add_argument("--basis", choices=["affine", "polynomial"],
                         default="affine")
        grp.add_argument("--degree", type=int, default=None)
        grp.add_argument("--beta", help="plug-in coefficients (skips --data)")
        grp.add_argument("--cov", help="plug-in covariance, row-major")
        grp.add_argument("--dof", default=None,
                         help="degrees of freedom for plug-in input "
                              "(default inf)")
        p.add_argument("--region", required=True)
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--side", choices=["upper", "lower", "two-sided"],
                       default="two-sided")
        p.add_argument("--shape", choices=["hyperbolic", "constant-width"],
                       default="hyperbolic")
        _add_mc_args(p)
        _add_out_args(p)
        p.set_defaults(func=func)

    p = sub.add_parser("levelset", help="confidence sets from a CSV fit")
    _add_data_args(p)
    p.add_argument("--region", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--lambda", dest="threshold", type=float, required=True)
    p.add_argument("--kind", choices=[*KINDS, "all"], default="all")
    p.add_argument("--shape", choices=["hyperbolic", "constant-width"],
                   default="hyperbolic")
    p.add_argument("--sublevel", action="store_true",
                   help="estimate the region where the function is <= lambda")
    _add_mc_args(p)
    _add_out_args(p)
    p.set_defaults(func=_cmd_levelset)

    p = sub.add_parser("glm-levelset",
                       help="approximate sets from plug-in (beta, cov)")
    p.add_argument("--beta", required=True)
    p.add_argument("--cov", required=True, help="row-major (p+1)^2 entries")
    p.add_argument("--region", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--lambda", dest="threshold", type=float, default=None)
    p.add_argument("--threshold-mean", type=float, default=None,
                   help="threshold on the mean-response scale")
    p.add_argument("--link", default=None,
                   help="link function (logit|log|identity|loglog) with "
                        "--threshold-mean, or increasing|decreasing with "
                        "--lambda")
    p.add_argument("--kind", choices=[*KINDS, "all"], default="all")
    _add_mc_args(p)
    _add_out_args(p)
    p.set_defaults(func=_cmd_glm_levelset)

    p = sub.add_parser("coverage", help="coverage simulation from a scenario")
    p.add_argument("--scenario", required=True, help="INI scenario file")
    p.add_argument("--sweep", action="store_true",
                   help="run the two-sided least-favorable sweep")
    _add_out_args(p)
    p.set_defaults(func=_cmd_coverage)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _NUMERICAL_ERRORS as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3
    except _VALIDATION_ERRORS as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 2
    except LevelBandError as exc:
        print(f"error[{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
