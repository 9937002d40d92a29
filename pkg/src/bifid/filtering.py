"""Benchmark-suite filtering on transformed feature vectors.

Rows are scanned once in a fixed order: lowest priority (highest tier
number) first, ties broken by descending instance id. A scanned row is
dropped when a row that is still present lies within ``theta`` of it, so
rows late in the scan, the high-priority ones, tend to survive.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .exceptions import SchemaError, SelectionError, SizeError, UndefinedFeatureError

# Priority tiers of instance sources; lower is kept first.
SOURCE_TIERS = {"solar": 0, "literature": 1, "disturbance": 2}


@dataclass(frozen=True)
class InstanceMetadataRow:
    instance_id: str
    features: tuple[float, ...]
    labels: tuple[int, ...]
    priority_tier: int = 1

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))
        object.__setattr__(self, "labels", tuple(int(b) for b in self.labels))
        if any(b not in (0, 1) for b in self.labels):
            raise SchemaError(f"{self.instance_id}: performance bits must be 0 or 1")


@dataclass
class FilterResult:
    retained: list[str]
    theta: float
    uniformity: float = float("nan")
    n_dissimilar: int = 0
    n_violations: int = 0
    n_critical: int = 0
    violations: list[str] = field(default_factory=list)


def scan_order(rows: Sequence[InstanceMetadataRow]) -> list[int]:
    """Indices in removal-scan order: descending tier, then descending id."""
    return sorted(range(len(rows)), key=lambda i: (rows[i].priority_tier, rows[i].instance_id),
                  reverse=True)


def _matrix(rows: Sequence[InstanceMetadataRow]) -> np.ndarray:
    if len(rows) == 0:
        return np.empty((0, 0))
    widths = {len(r.features) for r in rows}
    bits = {len(r.labels) for r in rows}
    if len(widths) != 1 or len(bits) != 1:
        raise SchemaError("rows disagree on the feature or label layout")
    ids = [r.instance_id for r in rows]
    if len(set(ids)) != len(ids):
        raise SchemaError("duplicate instance ids")
    F = np.array([r.features for r in rows], dtype=float)
    if not np.all(np.isfinite(F)):
        raise SchemaError("feature vectors must be finite (transform them first)")
    return F


def _filter(rows, theta, label_aware) -> list[int]:
    if theta < 0:
        raise ValueError(f"theta must be non-negative, got {theta}")
    F = _matrix(rows)
    n = len(rows)
    if n == 0:
        return []
    D = squareform(pdist(F)) if n > 1 else np.zeros((1, 1))
    close = D <= theta
    np.fill_diagonal(close, False)
    if label_aware:
        L = np.array([r.labels for r in rows])
        close &= (L[:, None, :] == L[None, :, :]).all(axis=2)
    present = np.ones(n, dtype=bool)
    for i in scan_order(rows):
        if np.any(close[i] & present):
            present[i] = False
    return [i for i in range(n) if present[i]]


def uniformity(features) -> float:
    """One minus the coefficient of variation of nearest-neighbour distances."""
    F = np.atleast_2d(np.asarray(features, dtype=float))
    if len(F) < 2:
        raise SizeError("uniformity needs at least two instances")
    D = squareform(pdist(F))
    np.fill_diagonal(D, np.inf)
    nn = D.min(axis=1)
    mean = nn.mean()
    if mean == 0:
        raise UndefinedFeatureError("all nearest-neighbour distances are zero")
    return float(1.0 - nn.std(ddof=1) / mean)


def _uniformity_or_nan(F) -> float:
    try:
        return uniformity(F)
    except (SizeError, UndefinedFeatureError):
        return float("nan")


def dissimilar_set(rows: Sequence[InstanceMetadataRow], theta: float) -> FilterResult:
    keep = _filter(rows, theta, label_aware=False)
    F = _matrix(rows)
    return FilterResult(
        retained=[rows[i].instance_id for i in keep],
        theta=float(theta),
        uniformity=_uniformity_or_nan(F[keep]) if len(keep) else float("nan"),
        n_dissimilar=len(keep),
        n_critical=len(keep),
    )


def critical_set(rows: Sequence[InstanceMetadataRow], theta: float) -> FilterResult:
    """Dissimilar rows plus rows whose close neighbours all carry different labels.

    Uniformity is reported for the dissimilar part, which is what drives
    the choice of ``theta``.
    """
    keep_c = _filter(rows, theta, label_aware=True)
    keep_d = _filter(rows, theta, label_aware=False)
    only_c = sorted(set(keep_c) - set(keep_d))
    F = _matrix(rows)
    return FilterResult(
        retained=[rows[i].instance_id for i in keep_c],
        theta=float(theta),
        uniformity=_uniformity_or_nan(F[keep_d]) if len(keep_d) else float("nan"),
        n_dissimilar=len(keep_d),
        n_violations=len(only_c),
        n_critical=len(keep_c),
        violations=[rows[i].instance_id for i in only_c],
    )


def scale_uniformity(values) -> np.ndarray:
    """Min-max rescale to [0, 1]; NaN stays NaN and a constant set maps to 1."""
    u = np.asarray(values, dtype=float)
    ok = np.isfinite(u)
    out = np.full_like(u, np.nan)
    if not ok.any():
        return out
    lo, hi = u[ok].min(), u[ok].max()
    out[ok] = 1.0 if hi == lo else (u[ok] - lo) / (hi - lo)
    return out


def select_theta(rows: Sequence[InstanceMetadataRow], grid: Sequence[float]) -> tuple[float, np.ndarray]:
    """Smallest grid value whose rescaled uniformity reaches 0.5.

    Returns the chosen value and the raw uniformity on the whole grid.
    """
    grid = [float(t) for t in grid]
    if not grid:
        raise SelectionError("theta grid is empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise SelectionError("theta grid must be ascending")
    raw = np.array([dissimilar_set(rows, t).uniformity for t in grid])
    scaled = scale_uniformity(raw)
    for theta, s in zip(grid, scaled):
        if np.isfinite(s) and s >= 0.5:
            return theta, raw
    raise SelectionError("uniformity is undefined on every grid value")

