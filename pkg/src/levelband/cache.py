"""Disk cache for Monte Carlo critical constants.

An entry is reused only when every calibration input matches exactly:
alpha, side, shape, region, draws, seed, grid settings, and a hash of the
band geometry (xtx_inv, degrees of freedom, basis). Entries carry a
checksum; anything edited or corrupt is ignored and recomputed.
"""
from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .bands import BandSpec, CriticalConstant, MonteCarloConfig
from .model import BoxRegion, RegressionFit

log = logging.getLogger(__name__)

_SCHEMA = 1


def geometry_hash(fit: RegressionFit) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(fit.xtx_inv).tobytes())
    h.update(repr(fit.dof).encode())
    h.update(fit.basis.kind.encode())
    h.update(repr(fit.basis.degree).encode())
    return h.hexdigest()


def fingerprint(fit: RegressionFit, spec: BandSpec,
                config: MonteCarloConfig) -> str:
    payload = _payload(fit, spec, config)
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode()).hexdigest()[:32]


def _payload(fit, spec, config) -> dict:
    return {
        "schema": _SCHEMA,
        "alpha": spec.alpha,
        "side": spec.side,
        "shape": spec.shape,
        "region": [spec.region.lower.tolist(), spec.region.upper.tolist()],
        "draws": config.draws,
        "seed": config.seed,
        "grid_points_per_dim": config.grid_points_per_dim,
        "refine_iterations": config.refine_iterations,
        "geometry": geometry_hash(fit),
    }


def _checksum(entry: dict) -> str:
    body = {k: v for k, v in entry.items() if k != "checksum"}
    return hashlib.sha256(
        json.dumps(body, sort_keys=True).encode()).hexdigest()


def store(cache_dir, fit: RegressionFit, c: CriticalConstant) -> Path:
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    entry = _payload(fit, c.spec, c.config)
    entry["value"] = c.value
    entry["std_error"] = c.std_error
    entry["checksum"] = _checksum(entry)
    path = cache_dir / f"{fingerprint(fit, c.spec, c.config)}.json"
    path.write_text(json.dumps(entry, sort_keys=True, indent=2),
                    encoding="utf-8")
    return path


def lookup(cache_dir, fit: RegressionFit, spec: BandSpec,
           config: MonteCarloConfig) -> CriticalConstant | None:
    path = Path(cache_dir) / f"{fingerprint(fit, spec, config)}.json"
    if not path.exists():
        return None
    try:
        entry = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError):
        log.warning("ignoring unreadable cache entry %s", path)
        return None
    if entry.get("checksum") != _checksum(entry):
        log.warning("ignoring cache entry with bad checksum %s", path)
        return None
    expected = _payload(fit, spec, config)
    if any(entry.get(k) != v for k, v in expected.items()):
        log.warning("ignoring cache entry with mismatched fields %s", path)
        return None
    return CriticalConstant(float(entry["value"]), float(entry["std_error"]),
                            spec, config)
