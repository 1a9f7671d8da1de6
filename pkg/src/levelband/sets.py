"""Confidence sets for the level set of the regression function.

Each set collects the points of the box where the chosen confidence band
sits at or above the threshold. Membership is exact; the extracted
geometry (interval union in 1-D, mask plus boundary polylines in 2-D) is
for reporting and plotting.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bands import BandSpec, CriticalConstant, MonteCarloConfig, \
    critical_constant
from .errors import KindMismatch, MismatchedProblems, NotPositiveDefinite
from .model import BasisMap, BoxRegion, RegressionFit

KINDS = ("G1u", "G1l", "G2u", "G2l")

# kind -> (required constant side, sign of the band term in membership)
_KIND_TABLE = {
    "G1u": ("upper", +1.0),
    "G1l": ("lower", -1.0),
    "G2u": ("two-sided", +1.0),
    "G2l": ("two-sided", -1.0),
}

_ROOT_TOL = 1e-8
_GRID_1D = 2001
_GRID_2D = 201


@dataclass(frozen=True)
class LevelSetEstimate:
    kind: str
    threshold: float
    region: BoxRegion
    membership: object  # vectorized predicate on (k, d) point arrays
    intervals: tuple | None = None        # d = 1
    mask: np.ndarray | None = None        # d = 2
    grid_axes: tuple | None = None        # d = 2
    polylines: tuple | None = None        # d = 2
    is_empty: bool = False
    is_all_of_K: bool = False
    approximate: bool = False

    def contains(self, x) -> bool:
        return bool(self.membership(np.atleast_2d(np.asarray(x, float)))[0])

    def to_json_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "lambda": float(self.threshold),
            "approximate": bool(self.approximate),
            "is_empty": bool(self.is_empty),
            "is_all_of_K": bool(self.is_all_of_K),
        }
        if self.intervals is not None:
            out["intervals"] = [[float(a), float(b)]
                                for a, b in self.intervals]
        if self.mask is not None:
            out["grid"] = {
                "nx": self.mask.shape[0],
                "ny": self.mask.shape[1],
                "bbox": {"lower": self.region.lower.tolist(),
                         "upper": self.region.upper.tolist()},
                "mask_rle": _run_length(self.mask.ravel()),
            }
            out["boundary_polylines"] = [
                [[float(a), float(b)] for a, b in line]
                for line in (self.polylines or ())
            ]
        return out


def _run_length(bits: np.ndarray) -> list[int]:
    """Run lengths of a flat boolean array, starting with the False run."""
    runs = []
    current, count = False, 0
    for b in bits:
        if bool(b) == current:
            count += 1
        else:
            runs.append(count)
            current, count = bool(b), 1
    runs.append(count)
    return runs


def _band_gap(fit: RegressionFit, c: CriticalConstant, sign: float,
              lam: float):
    """g(x) = est(x) + sign*c*sigma*m(x) - lambda, vectorized over points."""
    constant_width = c.spec.shape == "constant-width"
    coef = sign * c.value * fit.sigma_hat

    def g(pts: np.ndarray) -> np.ndarray:
        Xt = fit.basis.expand_many(pts)
        est = Xt @ fit.beta_hat
        if constant_width:
            m = np.ones(pts.shape[0])
        else:
            m = np.sqrt(np.einsum("ij,jk,ik->i", Xt, fit.xtx_inv, Xt))
        return est + coef * m - lam

    return g


def _bisect_root(g1, lo, hi, flo):
    """Root of the scalar gap function bracketed by a sign change."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= _ROOT_TOL:
            return mid
        fm = g1(mid)
        if (fm >= 0) == (flo >= 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _intervals_1d(g, region: BoxRegion, grid_n=_GRID_1D):
    lo, hi = float(region.lower[0]), float(region.upper[0])
    if lo == hi:
        member = g(np.array([[lo]]))[0] >= 0
        return ((lo, hi),) if member else ()
    xs = np.linspace(lo, hi, grid_n)
    gv = g(xs[:, None])
    mem = gv >= 0

    def g1(x):
        return g(np.array([[x]]))[0]

    intervals = []
    start = xs[0] if mem[0] else None
    for i in range(1, grid_n):
        if mem[i] != mem[i - 1]:
            root = _bisect_root(g1, xs[i - 1], xs[i], gv[i - 1])
            if mem[i]:
                start = root
            else:
                intervals.append((start, root))
                start = None
    if start is not None:
        intervals.append((start, xs[-1]))
    return tuple(intervals)


def _marching_squares(gz: np.ndarray, xs: np.ndarray, ys: np.ndarray):
    """Zero-contour segments of a scalar field on a rectilinear grid,
    chained into polylines. gz has shape (len(xs), len(ys))."""
    segments = []
    for i in range(len(xs) - 1):
        for j in range(len(ys) - 1):
            corners = [
                (xs[i], ys[j], gz[i, j]),
                (xs[i + 1], ys[j], gz[i + 1, j]),
                (xs[i + 1], ys[j + 1], gz[i + 1, j + 1]),
                (xs[i], ys[j + 1], gz[i, j + 1]),
            ]
            crossings = []
            for a in range(4):
                x1, y1, v1 = corners[a]
                x2, y2, v2 = corners[(a + 1) % 4]
                if (v1 >= 0) != (v2 >= 0):
                    t = v1 / (v1 - v2)
                    crossings.append((x1 + t * (x2 - x1),
                                      y1 + t * (y2 - y1)))
            if len(crossings) == 2:
                segments.append(tuple(crossings))
            elif len(crossings) == 4:
                # saddle cell: pair crossings along opposite edges
                segments.append((crossings[0], crossings[1]))
                segments.append((crossings[2], crossings[3]))
    return _chain_segments(segments)


def _chain_segments(segments, tol=1e-12):
    polylines = []
    remaining = list(segments)
    while remaining:
        seg = remaining.pop()
        line = [seg[0], seg[1]]
        grew = True
        while grew:
            grew = False
            for k, (a, b) in enumerate(remaining):
                if _close(line[-1], a, tol):
                    line.append(b)
                elif _close(line[-1], b, tol):
                    line.append(a)
                elif _close(line[0], a, tol):
                    line.insert(0, b)
                elif _close(line[0], b, tol):
                    line.insert(0, a)
                else:
                    continue
                remaining.pop(k)
                grew = True
                break
        polylines.append(tuple(line))
    return tuple(polylines)


def _close(p, q, tol):
    return abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol


def confidence_set(fit: RegressionFit, c: CriticalConstant, lam: float,
                   kind: str, approximate: bool = False) -> LevelSetEstimate:
    """Confidence set of the requested kind at threshold lam.

    Membership is {x in K : est(x) + s*c*sigma*m(x) >= lam} with s = +1 for
    the upper kinds and -1 for the lower kinds; the closed inequality keeps
    the set boundary inside the set.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    need_side, sign = _KIND_TABLE[kind]
    if c.spec.side != need_side:
        raise KindMismatch(
            f"{kind} needs a {need_side} constant, got {c.spec.side}")
    region = c.spec.region
    g = _band_gap(fit, c, sign, lam)

    def membership(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        inside = np.all((pts >= region.lower) & (pts <= region.upper), axis=1)
        return inside & (g(pts) >= 0)

    d = region.dim
    intervals = mask = axes = polylines = None
    if d == 1:
        intervals = _intervals_1d(g, region)
        empty = len(intervals) == 0
        full = (len(intervals) == 1
                and intervals[0][0] == region.lower[0]
                and intervals[0][1] == region.upper[0])
    elif d == 2:
        ax = region.grid_axes(_GRID_2D)
        mesh = np.meshgrid(*ax, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        gv = g(pts).reshape(len(ax[0]), len(ax[1]))
        mask = gv >= 0
        axes = (ax[0], ax[1])
        polylines = _marching_squares(gv, ax[0], ax[1])
        empty = not mask.any()
        full = bool(mask.all())
    else:
        probe = region.grid_points(5)
        gv = g(probe)
        empty = bool(np.all(gv < 0))
        full = bool(np.all(gv >= 0))
    return LevelSetEstimate(kind, lam, region, membership, intervals, mask,
                            axes, polylines, bool(empty), bool(full),
                            approximate)


def sublevel_set(fit: RegressionFit, c: CriticalConstant, lam: float,
                 kind: str, approximate: bool = False) -> LevelSetEstimate:
    """Confidence set for the region where the regression function is at
    most lam: the level-set construction applied to the negated fit at -lam.
    """
    est = confidence_set(fit.negated(), c, -lam, kind, approximate)
    return LevelSetEstimate(kind, lam, est.region, est.membership,
                            est.intervals, est.mask, est.grid_axes,
                            est.polylines, est.is_empty, est.is_all_of_K,
                            est.approximate)


@dataclass(frozen=True)
class LinkAdapter:
    """Plug-in normal approximation for a model with a monotone link.

    lam is the threshold already mapped to the linear-predictor scale,
    i.e. lam = L(threshold_mean).
    """

    beta_hat: np.ndarray
    cov: np.ndarray
    link_direction: str
    threshold_mean: float
    lam: float

    def __post_init__(self):
        if self.link_direction not in ("increasing", "decreasing"):
            raise ValueError("link_direction must be increasing or decreasing")
        b = np.atleast_1d(np.asarray(self.beta_hat, dtype=float))
        C = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "beta_hat", b)
        object.__setattr__(self, "cov", C)
        try:
            np.linalg.cholesky(0.5 * (C + C.T))
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite("covariance is not SPD") from exc

    def as_fit(self) -> RegressionFit:
        basis = BasisMap("affine")
        return RegressionFit(self.beta_hat, 1.0, math.inf,
                             0.5 * (self.cov + self.cov.T), basis)


def glm_confidence_set(adapter: LinkAdapter, region: BoxRegion, alpha: float,
                       kind: str, config: MonteCarloConfig,
                       constant: CriticalConstant | None = None
                       ) -> LevelSetEstimate:
    """Approximate confidence set for {x : E(Y) >= threshold_mean}.

    A decreasing link turns the mean-scale exceedance into a sublevel
    problem on the linear predictor.
    """
    fit = adapter.as_fit()
    if constant is None:
        side, _ = _KIND_TABLE[kind]
        spec = BandSpec(side, "hyperbolic", alpha, region)
        constant = critical_constant(fit, spec, config)
    if adapter.link_direction == "increasing":
        return confidence_set(fit, constant, adapter.lam, kind,
                              approximate=True)
    return sublevel_set(fit, constant, adapter.lam, kind, approximate=True)


def nesting_check(sets, probe_points: int = 10_000) -> bool:
    """True iff G2l => G1l => G1u => G2u pointwise on a deterministic grid."""
    by_kind = {s.kind: s for s in sets}
    if set(by_kind) != set(KINDS):
        raise MismatchedProblems("need exactly the four set kinds")
    ref = by_kind["G1u"]
    for s in sets:
        if s.threshold != ref.threshold or \
                not np.array_equal(s.region.lower, ref.region.lower) or \
                not np.array_equal(s.region.upper, ref.region.upper):
            raise MismatchedProblems("sets disagree on threshold or region")
    d = ref.region.dim
    per_dim = max(2, int(round(probe_points ** (1.0 / d))))
    pts = ref.region.grid_points(per_dim)
    chain = ["G2l", "G1l", "G1u", "G2u"]
    members = [by_kind[k].membership(pts) for k in chain]
    for inner, outer in zip(members, members[1:]):
        if np.any(inner & ~outer):
            return False
    return True
