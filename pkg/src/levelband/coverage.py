"""Simulation study of the coverage guarantees of the confidence sets.

For a known truth, data are repeatedly simulated, the sets rebuilt, and
set inclusion tested on a probe grid. The one-sided sets should cover at
rate exactly 1 - alpha in the least favorable flat configuration; the
two-sided sandwich is only guaranteed to be at least 1 - alpha.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .bands import BandSpec, CriticalConstant, MonteCarloConfig, \
    critical_constant
from .errors import DimensionMismatch
from .model import BasisMap, BoxRegion, RegressionFit, load_dataset_csv

EVENTS = ("G_subset_G1u", "G1l_subset_G", "two_sided_sandwich")

# Philox counter stride reserved per replication
_REP_STRIDE = 2 ** 24


@dataclass(frozen=True)
class CoverageScenario:
    true_beta: np.ndarray
    true_sigma: float
    covariates: np.ndarray          # raw design points, (n, d)
    basis: BasisMap
    region: BoxRegion
    lam: float
    alpha: float
    replications: int
    seed: int
    containment_grid: int = 512
    mc: MonteCarloConfig = field(default_factory=MonteCarloConfig)

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.true_beta, dtype=float))
        X = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        if X.shape[0] < b.size + 1:
            raise ValueError("need n >= p + 2 design points")
        if self.replications < 1:
            raise ValueError("replications must be positive")
        object.__setattr__(self, "true_beta", b)
        object.__setattr__(self, "covariates", X)

    def fingerprint(self) -> str:
        payload = json.dumps({
            "beta": self.true_beta.tolist(),
            "sigma": self.true_sigma,
            "covariates": self.covariates.tolist(),
            "basis": [self.basis.kind, self.basis.degree],
            "region": [self.region.lower.tolist(),
                       self.region.upper.tolist()],
            "lambda": self.lam,
            "alpha": self.alpha,
            "replications": self.replications,
            "seed": self.seed,
            "grid": self.containment_grid,
            "mc": [self.mc.draws, self.mc.seed],
        }, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class CoverageReport:
    event: str
    hit_rate: float
    mc_std_error: float
    replications: int
    scenario_fingerprint: str
    true_beta: tuple = ()

    def to_json_dict(self) -> dict:
        return {
            "event": self.event,
            "hit_rate": self.hit_rate,
            "mc_std_error": self.mc_std_error,
            "replications": self.replications,
            "scenario": self.scenario_fingerprint,
            "true_beta": list(self.true_beta),
        }


def _design(scenario: CoverageScenario) -> np.ndarray:
    X = scenario.basis.expand_many(scenario.covariates)
    if X.shape[1] != scenario.true_beta.size:
        raise DimensionMismatch("true_beta length does not match basis")
    return X


def geometry_fit(scenario: CoverageScenario) -> RegressionFit:
    """Fit object carrying only the Y-independent band geometry."""
    X = _design(scenario)
    n, k = X.shape
    _, R = np.linalg.qr(X)
    r_inv = np.linalg.inv(R)
    xtx_inv = r_inv @ r_inv.T
    xtx_inv = 0.5 * (xtx_inv + xtx_inv.T)
    return RegressionFit(np.zeros(k), 1.0, float(n - k), xtx_inv,
                         scenario.basis, n_obs=n)


def scenario_constant(scenario: CoverageScenario, side: str
                      ) -> CriticalConstant:
    """Band multiplier for the scenario; depends only on design, region,
    alpha, and side, so it is computed once and reused across replications.
    """
    geom = geometry_fit(scenario)
    spec = BandSpec(side, "hyperbolic", scenario.alpha, scenario.region)
    return critical_constant(geom, spec, scenario.mc)


def replication_estimates(scenario: CoverageScenario
                          ) -> tuple[np.ndarray, np.ndarray]:
    """Per-replication (beta_hat, sigma_hat) arrays.

    Replication r consumes a Philox stream that depends only on
    (scenario.seed, r), so results are worker- and order-independent.
    """
    X = _design(scenario)
    n, k = X.shape
    nu = n - k
    Q, R = np.linalg.qr(X)
    mean = X @ scenario.true_beta
    betas = np.empty((scenario.replications, k))
    sigmas = np.empty(scenario.replications)
    for r in range(scenario.replications):
        bg = np.random.Philox(key=np.uint64(scenario.seed))
        bg.advance(r * _REP_STRIDE)
        gen = np.random.Generator(bg)
        y = mean + scenario.true_sigma * gen.standard_normal(n)
        b = np.linalg.solve(R, Q.T @ y)
        resid = y - X @ b
        betas[r] = b
        sigmas[r] = math.sqrt(float(resid @ resid) / nu)
    return betas, sigmas


def _probe_grid(scenario: CoverageScenario) -> np.ndarray:
    d = scenario.region.dim
    per_dim = max(2, int(round(scenario.containment_grid ** (1.0 / d))))
    return scenario.region.grid_points(per_dim)


def event_hits(scenario: CoverageScenario, event: str,
               constant: CriticalConstant | None = None) -> np.ndarray:
    """Per-replication containment indicators for one coverage guarantee."""
    if event not in EVENTS:
        raise ValueError(f"event must be one of {EVENTS}")
    side = {"G_subset_G1u": "upper", "G1l_subset_G": "lower",
            "two_sided_sandwich": "two-sided"}[event]
    if constant is None:
        constant = scenario_constant(scenario, side)
    elif constant.spec.side != side:
        raise ValueError(f"event {event} needs a {side} constant")

    probe = _probe_grid(scenario)
    Xp = scenario.basis.expand_many(probe)
    geom = geometry_fit(scenario)
    m = np.sqrt(np.einsum("ij,jk,ik->i", Xp, geom.xtx_inv, Xp))
    truth = Xp @ scenario.true_beta
    in_G = truth >= scenario.lam

    betas, sigmas = replication_estimates(scenario)
    est = Xp @ betas.T                       # (P, R)
    half = constant.value * np.outer(m, sigmas)
    lam = scenario.lam
    if event == "G_subset_G1u":
        member_u = est + half >= lam
        return np.all(member_u[in_G], axis=0) if in_G.any() else \
            np.ones(scenario.replications, dtype=bool)
    if event == "G1l_subset_G":
        member_l = est - half >= lam
        outside = ~in_G
        return ~np.any(member_l[outside], axis=0) if outside.any() else \
            np.ones(scenario.replications, dtype=bool)
    member_u = est + half >= lam
    member_l = est - half >= lam
    ok_u = np.all(member_u[in_G], axis=0) if in_G.any() else True
    ok_l = ~np.any(member_l[~in_G], axis=0) if (~in_G).any() else True
    hits = np.logical_and(ok_u, ok_l)
    return np.broadcast_to(hits, (scenario.replications,)).copy()


def run_coverage(scenario: CoverageScenario, event: str,
                 constant: CriticalConstant | None = None) -> CoverageReport:
    hits = event_hits(scenario, event, constant)
    rate = float(np.mean(hits))
    se = math.sqrt(rate * (1.0 - rate) / scenario.replications)
    return CoverageReport(event, rate, se, scenario.replications,
                          scenario.fingerprint(),
                          tuple(scenario.true_beta.tolist()))


def default_sweep_betas(scenario: CoverageScenario) -> list[np.ndarray]:
    """Candidate truth configurations for probing the two-sided bound."""
    k = scenario.true_beta.size
    lam, sig = scenario.lam, scenario.true_sigma
    width = float(np.max(scenario.region.upper - scenario.region.lower))
    s = 2.0 * sig / max(width, 1e-12)
    delta = 0.1 * sig

    def beta(intercept, slope):
        b = np.zeros(k)
        b[0] = intercept
        if k > 1:
            b[1] = slope
        return b

    return [beta(lam, 0.0), beta(lam, s), beta(lam, -s),
            beta(lam - delta, 2.0 * s), beta(lam + delta, -2.0 * s)]


def run_least_favorable_sweep(base: CoverageScenario,
                              betas: list | None = None
                              ) -> list[CoverageReport]:
    """Two-sided sandwich hit rates across candidate truths.

    The critical constant is shared: it depends only on the design,
    region, and alpha, never on the truth.
    """
    if betas is None:
        betas = default_sweep_betas(base)
    c2 = scenario_constant(base, "two-sided")
    reports = []
    for b in betas:
        scen = replace(base, true_beta=np.asarray(b, dtype=float))
        reports.append(run_coverage(scen, "two_sided_sandwich", c2))
    return reports


def report_table(reports: list[CoverageReport]) -> str:
    """Aligned-column text table of coverage reports."""
    header = f"{'event':<22}{'hit_rate':>10}{'mc_se':>10}{'reps':>8}  beta"
    lines = [header, "-" * len(header)]
    for r in reports:
        beta = ", ".join(f"{v:g}" for v in r.true_beta)
        lines.append(f"{r.event:<22}{r.hit_rate:>10.4f}"
                     f"{r.mc_std_error:>10.4f}{r.replications:>8d}  ({beta})")
    return "\n".join(lines)


def scenario_from_ini(path) -> tuple[CoverageScenario, str | None]:
    """Read a scenario from a key = value sections file.

    Returns the scenario and the optional requested event name.
    """
    cp = configparser.ConfigParser()
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)

    model = cp["model"]
    true_beta = [float(v) for v in model["true_beta"].split(",")]
    true_sigma = float(model["true_sigma"])
    kind = model.get("basis", "affine")
    degree = model.getint("degree", fallback=None)
    basis = BasisMap(kind, degree)

    reg = cp["region"]
    lower = [float(v) for v in reg["lower"].split(",")]
    upper = [float(v) for v in reg["upper"].split(",")]
    region = BoxRegion(np.array(lower), np.array(upper))

    design = model.get("design", "linspace")
    if design == "linspace":
        n = model.getint("n")
        axes = [np.linspace(lo, hi, n) for lo, hi in zip(lower, upper)]
        covariates = np.stack(axes, axis=-1)
    else:
        cols = model["design_columns"].split(",")
        ds = load_dataset_csv(design, cols[0], cols)
        covariates = ds.covariates  # response column unused; reuse loader

    study = cp["study"]
    mc_section = cp["montecarlo"] if cp.has_section("montecarlo") else {}
    mc = MonteCarloConfig(
        draws=int(mc_section.get("draws", 200_000)),
        seed=int(mc_section.get("seed", 0)),
        workers=int(mc_section.get("workers", 1)),
        grid_points_per_dim=(int(mc_section["grid_points_per_dim"])
                             if "grid_points_per_dim" in mc_section else None),
        refine_iterations=int(mc_section.get("refine_iterations", 40)),
    )
    scenario = CoverageScenario(
        true_beta=np.array(true_beta),
        true_sigma=true_sigma,
        covariates=covariates,
        basis=basis,
        region=region,
        lam=float(study["lambda"]),
        alpha=float(study["alpha"]),
        replications=int(study["replications"]),
        seed=int(study["seed"]),
        containment_grid=int(study.get("containment_grid", 512)),
        mc=mc,
    )
    return scenario, study.get("event")
