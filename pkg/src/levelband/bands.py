"""Monte Carlo critical constants for simultaneous confidence bands.

The pivot is sup over the covariate box of (+/-) xt'Z / (S * m(x)) with
Z ~ N(0, (X'X)^{-1}) and S = sqrt(chi2_nu / nu); its (1 - alpha) quantile
is the band multiplier. The supremum is approximated by a dense grid
followed by coordinate-wise golden-section refinement.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch, EmptyRegion, NotPositiveDefinite
from .model import BasisMap, BoxRegion, RegressionFit

SIDES = ("upper", "lower", "two-sided")
SHAPES = ("hyperbolic", "constant-width")

# Draws are generated in fixed-size blocks so the stream consumed by draw j
# is a pure function of (seed, j), independent of the worker count.
_BLOCK = 4096
_BLOCK_STRIDE = 2 ** 36  # Philox counter steps reserved per block

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BandSpec:
    """What band is being calibrated: side, half-width shape, level, box."""

    side: str
    shape: str
    alpha: float
    region: BoxRegion

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}")
        if self.shape not in SHAPES:
            raise ValueError(f"shape must be one of {SHAPES}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")


@dataclass(frozen=True)
class MonteCarloConfig:
    draws: int = 200_000
    seed: int = 0
    workers: int = 1
    grid_points_per_dim: int | None = None
    refine_iterations: int = 40

    def __post_init__(self):
        if self.draws < 1:
            raise ValueError("draws must be positive")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        if self.refine_iterations < 0:
            raise ValueError("refine_iterations must be nonnegative")
        if self.grid_points_per_dim is not None and self.grid_points_per_dim < 2:
            raise ValueError("grid_points_per_dim must be at least 2")

    def resolve_grid(self, dim: int) -> int:
        if self.grid_points_per_dim is not None:
            return self.grid_points_per_dim
        if dim <= 2:
            return 201
        if dim == 3:
            return 51
        raise ValueError(
            "regions with d > 3 need an explicit grid_points_per_dim")


@dataclass(frozen=True)
class CriticalConstant:
    value: float
    std_error: float
    spec: BandSpec
    config: MonteCarloConfig

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "std_error": self.std_error,
            "alpha": self.spec.alpha,
            "side": self.spec.side,
            "shape": self.spec.shape,
            "region": {"lower": self.spec.region.lower.tolist(),
                       "upper": self.spec.region.upper.tolist()},
            "draws": self.config.draws,
            "seed": self.config.seed,
        }


def _check_region(region: BoxRegion):
    if region.is_empty:
        raise EmptyRegion("box region has a lower bound above its upper bound")


def _ratio_values(points, Z, S, xtx_inv, basis, constant_width):
    """Signed ratio xt'Z / (S m(x)) for per-draw points.

    points: (k, d) one point per draw; Z: (k, p+1); S: (k,).
    """
    Xt = basis.expand_many(points)
    num = np.einsum("ij,ij->i", Xt, Z)
    if constant_width:
        m = 1.0
    else:
        m = np.sqrt(np.einsum("ij,jk,ik->i", Xt, xtx_inv, Xt))
    return num / (S * m)


def _golden_max_batch(coord_eval, a, b, iters):
    """Vectorized golden-section maximization on per-row brackets [a, b].

    coord_eval maps a vector of abscissae (one per row) to objective values.
    Returns (argmax, max) arrays.
    """
    a = a.copy()
    b = b.copy()
    for _ in range(iters):
        c = b - _INV_PHI * (b - a)
        d = a + _INV_PHI * (b - a)
        left = coord_eval(c) >= coord_eval(d)
        b = np.where(left, d, b)
        a = np.where(left, a, c)
    mid = 0.5 * (a + b)
    return mid, coord_eval(mid)


def _refine_batch(points, Z, S, xtx_inv, basis, region, spacing,
                  constant_width, iters, negate=False):
    """Coordinate-wise golden refinement of per-draw maximizer points."""
    Zs = -Z if negate else Z
    vals = _ratio_values(points, Zs, S, xtx_inv, basis, constant_width)
    if iters == 0:
        return vals
    pts = points.copy()
    d = region.dim
    max_sweeps = 1 if d == 1 else 12
    free = [j for j in range(d) if region.lower[j] < region.upper[j]]
    for _ in range(max_sweeps):
        for j in free:
            h = spacing[j]
            a = np.maximum(pts[:, j] - h, region.lower[j])
            b = np.minimum(pts[:, j] + h, region.upper[j])

            def coord_eval(t, j=j):
                cand = pts.copy()
                cand[:, j] = t
                return _ratio_values(cand, Zs, S, xtx_inv, basis,
                                     constant_width)

            best_t, _ = _golden_max_batch(coord_eval, a, b, iters)
            pts[:, j] = best_t
        new_vals = _ratio_values(pts, Zs, S, xtx_inv, basis, constant_width)
        gain = new_vals - vals
        vals = np.maximum(vals, new_vals)
        if np.max(gain) <= 1e-10 * (1.0 + np.max(np.abs(vals))):
            break
    return vals


def _stationary_starts(Z, xtx_inv, basis, region, constant_width):
    """Unconstrained stationary points of the hyperbolic ratio, clamped to
    the box: the maximizing regressor is proportional to A^{-1} z, realizable
    only for the affine basis with intercept normalized to 1.

    Returns an (k, d) array or None when no closed-form seed exists.
    """
    if constant_width or basis.kind != "affine":
        return None
    W = np.linalg.solve(xtx_inv, Z.T).T
    lead = W[:, 0].copy()
    bad = np.abs(lead) < 1e-300
    lead[bad] = 1.0
    pts = W[:, 1:] / lead[:, None]
    pts = np.clip(pts, region.lower, region.upper)
    if bad.any():
        center = 0.5 * (region.lower + region.upper)
        pts[bad] = center
    return pts


def _grid_tables(region, basis, xtx_inv, grid_n, constant_width):
    axes = region.grid_axes(grid_n)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    Xt = basis.expand_many(pts)
    if constant_width:
        m = np.ones(pts.shape[0])
    else:
        m = np.sqrt(np.einsum("ij,jk,ik->i", Xt, xtx_inv, Xt))
    spacing = np.array([ax[1] - ax[0] if ax.size > 1 else 0.0 for ax in axes])
    return pts, Xt, m, spacing


def sup_ratio(z, denom_scale: float, xtx_inv, basis: BasisMap,
              region: BoxRegion, signed: bool,
              config: MonteCarloConfig | None = None,
              constant_width: bool = False) -> float:
    """Supremum over the box of xt'z / (scale * m(x)), or of its absolute
    value when signed is False.

    Grid maximization over grid_points_per_dim^d nodes, then golden-section
    refinement multi-started from every grid node within 1% of the best.
    The result never exceeds the true supremum.
    """
    _check_region(region)
    if denom_scale <= 0:
        raise ValueError("denom_scale must be positive")
    config = config or MonteCarloConfig()
    z = np.atleast_1d(np.asarray(z, dtype=float))
    xtx_inv = np.asarray(xtx_inv, dtype=float)
    if basis.output_dim(region.dim) != z.size:
        raise DimensionMismatch("z length does not match basis/region")
    grid_n = config.resolve_grid(region.dim)
    pts, Xt, m, spacing = _grid_tables(region, basis, xtx_inv, grid_n,
                                       constant_width)
    vals = (Xt @ z) / m
    if not signed:
        vals = np.abs(vals)
    best = float(np.max(vals))
    if config.refine_iterations == 0:
        return best / denom_scale
    thresh = best - 0.01 * abs(best) - 1e-300
    starts = pts[vals >= thresh]
    seed = _stationary_starts(z[None, :], xtx_inv, basis, region,
                              constant_width)
    if seed is not None:
        starts = np.vstack([starts, seed])
    k = starts.shape[0]
    S = np.ones(k)
    out = [best]
    for negate in ((False,) if signed else (False, True)):
        Zk = np.tile(z, (k, 1))
        refined = _refine_batch(starts, Zk, S, xtx_inv, basis, region,
                                np.maximum(spacing, 1e-300), constant_width,
                                config.refine_iterations, negate=negate)
        out.append(float(np.max(refined)))
    return max(out) / denom_scale


def _simulate_block(block_idx, n_draws, L, dof, basis, region, xtx_inv,
                    grid_Xt, grid_pts, grid_m, spacing, signed,
                    constant_width, seed, refine_iters):
    """Sup-pivot values for one fixed block of draws."""
    k = L.shape[0]
    bg = np.random.Philox(key=np.uint64(seed))
    bg.advance(block_idx * _BLOCK_STRIDE)
    gen = np.random.Generator(bg)
    N = gen.standard_normal((n_draws, k))
    Z = N @ L.T
    if math.isinf(dof):
        S = np.ones(n_draws)
    else:
        S = np.sqrt(2.0 * gen.standard_gamma(dof / 2.0, n_draws) / dof)

    # grid stage, chunked to bound the (grid x draws) temporary
    G = grid_Xt.shape[0]
    chunk = max(1, int(4e7 / max(G, 1)))
    best_vals = np.empty(n_draws)
    best_idx = np.empty(n_draws, dtype=np.int64)
    worst_idx = np.empty(n_draws, dtype=np.int64)
    for a in range(0, n_draws, chunk):
        b = min(a + chunk, n_draws)
        R = (grid_Xt @ Z[a:b].T) / grid_m[:, None]
        best_idx[a:b] = np.argmax(R, axis=0)
        best_vals[a:b] = R[best_idx[a:b], np.arange(b - a)]
        if not signed:
            worst_idx[a:b] = np.argmin(R, axis=0)
            lo = R[worst_idx[a:b], np.arange(b - a)]
            flip = -lo > best_vals[a:b]
            best_vals[a:b] = np.where(flip, -lo, best_vals[a:b])
    best_vals = best_vals / S

    if refine_iters == 0 or grid_pts.shape[0] == 1:
        return best_vals

    sp = np.maximum(spacing, 1e-300)
    T = best_vals
    seeds = _stationary_starts(Z, xtx_inv, basis, region, constant_width)
    starts_pos = [grid_pts[best_idx]] + ([seeds] if seeds is not None else [])
    for start in starts_pos:
        r = _refine_batch(start, Z, S, xtx_inv, basis, region, sp,
                          constant_width, refine_iters, negate=False)
        T = np.maximum(T, r)
    if not signed:
        starts_neg = [grid_pts[worst_idx]] + \
            ([seeds] if seeds is not None else [])
        for start in starts_neg:
            r = _refine_batch(start, Z, S, xtx_inv, basis, region, sp,
                              constant_width, refine_iters, negate=True)
            T = np.maximum(T, r)
    return T


def simulate_pivots(fit: RegressionFit, spec: BandSpec,
                    config: MonteCarloConfig) -> np.ndarray:
    """All Monte Carlo sup-pivot values T_j, in draw order.

    Deterministic for a fixed (seed, draws) and any worker count.
    """
    _check_region(spec.region)
    if not fit.basis.input_dim_ok(spec.region.dim) or \
            fit.basis.output_dim(spec.region.dim) != fit.beta_hat.size:
        raise DimensionMismatch("fit and region dimensions do not agree")
    try:
        L = np.linalg.cholesky(fit.xtx_inv)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("xtx_inv is not positive definite") from exc
    grid_n = config.resolve_grid(spec.region.dim)
    constant_width = spec.shape == "constant-width"
    grid_pts, grid_Xt, grid_m, spacing = _grid_tables(
        spec.region, fit.basis, fit.xtx_inv, grid_n, constant_width)
    signed = spec.side != "two-sided"

    blocks = [(i, min(_BLOCK, config.draws - start))
              for i, start in enumerate(range(0, config.draws, _BLOCK))]

    def run(item):
        i, nb = item
        return _simulate_block(i, nb, L, fit.dof, fit.basis, spec.region,
                               fit.xtx_inv, grid_Xt, grid_pts, grid_m,
                               spacing, signed, constant_width, config.seed,
                               config.refine_iterations)

    if config.workers == 1 or len(blocks) == 1:
        parts = [run(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as ex:
            parts = list(ex.map(run, blocks))
    return np.concatenate(parts)


def quantile_with_se(T: np.ndarray, alpha: float) -> tuple[float, float]:
    """Order-statistic (1 - alpha) quantile with a binomial standard error.

    Uses the ceil((1 - alpha) n) order statistic; the density at the
    quantile is surrogated by the local spacing of order statistics.
    """
    n = T.size
    Ts = np.sort(T)
    r = int(math.ceil((1.0 - alpha) * n))
    r = min(max(r, 1), n)
    value = float(Ts[r - 1])
    k = max(1, int(round(math.sqrt(n))))
    lo = max(0, r - 1 - k)
    hi = min(n - 1, r - 1 + k)
    if hi > lo and Ts[hi] > Ts[lo]:
        se = math.sqrt(alpha * (1 - alpha) / n) * n * \
            float(Ts[hi] - Ts[lo]) / (hi - lo)
    else:
        se = 0.0
    return value, se


def critical_constant(fit: RegressionFit, spec: BandSpec,
                      config: MonteCarloConfig) -> CriticalConstant:
    """Monte Carlo band multiplier c1 (one-sided) or c2 (two-sided)."""
    T = simulate_pivots(fit, spec, config)
    value, se = quantile_with_se(T, spec.alpha)
    return CriticalConstant(value, se, spec, config)


def band_at(fit: RegressionFit, c: CriticalConstant, x) -> tuple[float, float]:
    """Pointwise band bounds at a covariate point.

    One-sided specs leave the unbounded side at +/- infinity.
    """
    est = fit.estimate_at(x)
    if c.spec.shape == "constant-width":
        m = 1.0
    else:
        from .model import band_width_factor
        m = band_width_factor(fit, x)
    half = c.value * fit.sigma_hat * m
    if c.spec.side == "upper":
        return (-math.inf, est + half)
    if c.spec.side == "lower":
        return (est - half, math.inf)
    return (est - half, est + half)


def with_spec(c: CriticalConstant, **changes) -> CriticalConstant:
    return replace(c, spec=replace(c.spec, **changes))
