"""Figure emission: band curves, threshold line, shaded confidence sets."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
# deterministic SVG element ids so repeated runs are byte-identical
matplotlib.rcParams["svg.hashsalt"] = "levelband"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bands import CriticalConstant  # noqa: E402
from .model import RegressionFit, band_width_many  # noqa: E402

_SET_COLORS = {"G1u": "tab:blue", "G1l": "tab:green",
               "G2u": "tab:orange", "G2l": "tab:red"}

# suppress the embedded creation date for reproducible output files
_STABLE_METADATA = {"Date": None}


def band_curves(fit: RegressionFit, c: CriticalConstant,
                xs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Estimate and band bounds on a 1-D grid; one-sided bands get NaN on
    their unbounded side."""
    pts = xs[:, None]
    est = fit.estimate_many(pts)
    if c.spec.shape == "constant-width":
        m = np.ones(xs.size)
    else:
        m = band_width_many(fit, pts)
    half = c.value * fit.sigma_hat * m
    lo = est - half if c.spec.side in ("lower", "two-sided") else \
        np.full_like(est, np.nan)
    hi = est + half if c.spec.side in ("upper", "two-sided") else \
        np.full_like(est, np.nan)
    return est, lo, hi


def render_levelset_1d(fit: RegressionFit, constants: dict, sets: list,
                       lam: float, path) -> None:
    """Band curves plus the extracted sets shaded along the x axis."""
    region = sets[0].region
    xs = np.linspace(float(region.lower[0]), float(region.upper[0]), 400)
    fig, ax = plt.subplots(figsize=(7, 5))
    est = fit.estimate_many(xs[:, None])
    ax.plot(xs, est, color="black", lw=1.5, label="estimate")
    for label, c in constants.items():
        _, lo, hi = band_curves(fit, c, xs)
        for curve in (lo, hi):
            if not np.all(np.isnan(curve)):
                ax.plot(xs, curve, lw=1.0, ls="--", label=f"{label} band")
    ax.axhline(lam, color="gray", lw=1.0, label=f"threshold {lam:g}")
    y0, y1 = ax.get_ylim()
    offset = 0.0
    for s in sets:
        for a, b in (s.intervals or ()):
            ax.plot([a, b], [y0 + offset, y0 + offset], lw=4,
                    color=_SET_COLORS.get(s.kind, "tab:gray"),
                    solid_capstyle="butt",
                    label=s.kind if (a, b) == (s.intervals or ((None,),))[0]
                    else None)
        offset += 0.02 * (y1 - y0)
    ax.set_xlabel("x")
    ax.set_ylabel("linear predictor")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, metadata=_STABLE_METADATA)
    plt.close(fig)


def render_levelset_2d(sets: list, lam: float, path) -> None:
    """Grid masks and boundary polylines over the covariate rectangle."""
    region = sets[0].region
    fig, axes = plt.subplots(1, len(sets), figsize=(4 * len(sets), 4),
                             squeeze=False)
    for ax, s in zip(axes[0], sets):
        if s.mask is not None:
            gx, gy = s.grid_axes
            ax.pcolormesh(gx, gy, s.mask.T, cmap="Greys", alpha=0.4,
                          shading="auto")
            for line in (s.polylines or ()):
                arr = np.asarray(line)
                ax.plot(arr[:, 0], arr[:, 1], color=_SET_COLORS.get(s.kind),
                        lw=1.5)
        ax.set_xlim(region.lower[0], region.upper[0])
        ax.set_ylim(region.lower[1], region.upper[1])
        ax.set_title(f"{s.kind} (threshold {lam:g})", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, metadata=_STABLE_METADATA)
    plt.close(fig)
