"""Linear-model substrate: basis expansion, box regions, OLS fitting.

Everything here is immutable after construction and safe to share across
threads; all operations are pure functions of their arguments.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, RankDeficient, SampleTooSmall


def _frozen_array(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class BasisMap:
    """Map from a raw covariate point x to the regressor vector.

    kind 'affine' gives (1, x1, ..., xd); kind 'polynomial' requires a
    single raw covariate and gives (1, x, x^2, ..., x^degree).
    """

    kind: str
    degree: int | None = None

    def __post_init__(self):
        if self.kind not in ("affine", "polynomial"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "polynomial":
            if self.degree is None or self.degree < 1:
                raise ValueError("polynomial basis needs degree >= 1")

    def input_dim_ok(self, d: int) -> bool:
        return d == 1 if self.kind == "polynomial" else d >= 1

    def output_dim(self, d: int) -> int:
        if self.kind == "polynomial":
            if d != 1:
                raise DimensionMismatch("polynomial basis needs d = 1")
            return self.degree + 1
        return d + 1

    def expand(self, x) -> np.ndarray:
        """Regressor vector for a single point; first coordinate is 1."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.ndim != 1:
            raise DimensionMismatch("expected a single covariate point")
        return self.expand_many(x[None, :])[0]

    def expand_many(self, X) -> np.ndarray:
        """Row-wise expansion of an (n, d) matrix of points to (n, p+1)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise DimensionMismatch("expected an (n, d) matrix of points")
        n, d = X.shape
        if self.kind == "polynomial":
            if d != 1:
                raise DimensionMismatch("polynomial basis needs d = 1")
            return X[:, 0:1] ** np.arange(self.degree + 1)
        return np.hstack([np.ones((n, 1)), X])


@dataclass(frozen=True)
class BoxRegion:
    """Axis-aligned box of closed per-coordinate intervals.

    A degenerate coordinate (lower == upper) pins that covariate.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = _frozen_array(np.atleast_1d(self.lower))
        hi = _frozen_array(np.atleast_1d(self.upper))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("region bounds must be equal-length vectors")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def is_empty(self) -> bool:
        return bool(np.any(self.lower > self.upper))

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size != self.dim:
            raise DimensionMismatch("point dimension does not match region")
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def grid_axes(self, points_per_dim: int) -> list[np.ndarray]:
        """Per-coordinate grids; degenerate coordinates get a single node."""
        axes = []
        for lo, hi in zip(self.lower, self.upper):
            if lo == hi:
                axes.append(np.array([lo]))
            else:
                axes.append(np.linspace(lo, hi, points_per_dim))
        return axes

    def grid_points(self, points_per_dim: int) -> np.ndarray:
        """Full product grid as an (N, d) array, C-ordered."""
        mesh = np.meshgrid(*self.grid_axes(points_per_dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class Dataset:
    """Observed responses and raw covariates."""

    responses: np.ndarray
    covariates: np.ndarray

    def __post_init__(self):
        y = _frozen_array(np.atleast_1d(self.responses))
        X = np.asarray(self.covariates, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        X = _frozen_array(X)
        if y.ndim != 1 or X.ndim != 2 or X.shape[0] != y.size:
            raise DimensionMismatch("responses and covariates do not align")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValueError("dataset contains non-finite entries")
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "covariates", X)

    @property
    def n(self) -> int:
        return self.responses.size

    @property
    def d(self) -> int:
        return self.covariates.shape[1]


@dataclass(frozen=True)
class RegressionFit:
    """Fitted coefficients plus the pivotal geometry of the band problem.

    dof is n - p - 1 for an OLS fit; math.inf encodes the known-scale
    asymptotic-normal case with sigma_hat_sq == 1 (GLM adapter).
    """

    beta_hat: np.ndarray
    sigma_hat_sq: float
    dof: float
    xtx_inv: np.ndarray
    basis: BasisMap
    n_obs: int | None = field(default=None)

    def __post_init__(self):
        b = _frozen_array(np.atleast_1d(self.beta_hat))
        A = _frozen_array(np.atleast_2d(self.xtx_inv))
        if A.shape != (b.size, b.size):
            raise DimensionMismatch("xtx_inv shape does not match beta_hat")
        if self.sigma_hat_sq < 0:
            raise ValueError("sigma_hat_sq must be nonnegative")
        object.__setattr__(self, "beta_hat", b)
        object.__setattr__(self, "xtx_inv", A)

    @property
    def p(self) -> int:
        return self.beta_hat.size - 1

    @property
    def sigma_hat(self) -> float:
        return float(np.sqrt(self.sigma_hat_sq))

    def estimate_at(self, x) -> float:
        """Point estimate of the regression function at a covariate point."""
        return float(self.basis.expand(x) @ self.beta_hat)

    def estimate_many(self, X) -> np.ndarray:
        return self.basis.expand_many(X) @ self.beta_hat

    def negated(self) -> "RegressionFit":
        """Same geometry, fitted function negated (for sublevel problems)."""
        return RegressionFit(-self.beta_hat, self.sigma_hat_sq, self.dof,
                             self.xtx_inv, self.basis, self.n_obs)


def expand_basis(basis: BasisMap, x) -> np.ndarray:
    return basis.expand(x)


def fit_ols(data: Dataset, basis: BasisMap) -> RegressionFit:
    """Least-squares fit via QR; refuses rank-deficient designs.

    (X^T X)^{-1} is recovered from the triangular factor rather than by
    forming and inverting the normal equations.
    """
    X = basis.expand_many(data.covariates)
    n, k = X.shape  # k = p + 1
    if n < k + 1:
        raise SampleTooSmall(f"need n >= p + 2 = {k + 1}, got n = {n}")
    s = np.linalg.svd(X, compute_uv=False)
    tol = max(n, k) * np.finfo(float).eps * s[0]
    if np.sum(s > tol) < k:
        raise RankDeficient("design matrix is numerically rank deficient")
    Q, R = np.linalg.qr(X)
    beta = np.linalg.solve(R, Q.T @ data.responses)
    resid = data.responses - X @ beta
    nu = n - k
    r_inv = np.linalg.inv(R)
    xtx_inv = r_inv @ r_inv.T
    xtx_inv = 0.5 * (xtx_inv + xtx_inv.T)
    return RegressionFit(beta, float(resid @ resid) / nu, float(nu),
                         xtx_inv, basis, n_obs=n)


def band_width_factor(fit: RegressionFit, x) -> float:
    """Hyperbolic half-width factor sqrt(xt' (X'X)^{-1} xt) at one point."""
    xt = fit.basis.expand(x)
    if xt.size != fit.beta_hat.size:
        raise DimensionMismatch("point dimension does not match fit")
    return float(np.sqrt(xt @ fit.xtx_inv @ xt))


def band_width_many(fit: RegressionFit, X) -> np.ndarray:
    Xt = fit.basis.expand_many(X)
    return np.sqrt(np.einsum("ij,jk,ik->i", Xt, fit.xtx_inv, Xt))


def load_dataset_csv(path, response: str, covariates: list[str]) -> Dataset:
    """Read a UTF-8 CSV with a header row into a Dataset.

    The response column and covariate columns are selected by name;
    covariate column order is preserved as given.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in [response, *covariates]
                   if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"missing CSV columns: {missing}")
        ys, rows = [], []
        for rec in reader:
            ys.append(float(rec[response]))
            rows.append([float(rec[c]) for c in covariates])
    return Dataset(np.array(ys), np.array(rows))
