"""Latin hypercube plans and nested high-fidelity subsets.

Plans live in the unit hypercube and use cell midpoints, so every column
is a permutation of ``(k + 0.5) / n``. Both optimisers are greedy
first-improvement searches on the minimum pairwise Euclidean distance:
candidates are scanned in lexicographic order and the scan restarts after
each accepted swap, which makes the result a deterministic function of
the starting plan.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .exceptions import SchemaError, SizeError

PLAN_FORMAT = "bifid-plan"
PLAN_VERSION = 1

# Midpoint-lattice distances that are equal in exact arithmetic can differ by
# an ulp in floating point; a swap counts as improving only beyond this.
IMPROVEMENT_RTOL = 1e-10


def improves(candidate: float, current: float) -> bool:
    return candidate > current * (1 + IMPROVEMENT_RTOL)


@dataclass(frozen=True)
class SamplingPlan:
    points: np.ndarray
    seed: int

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True)
class NestedDesign:
    plan: SamplingPlan
    subset_indices: tuple[int, ...]
    seed: int = 0

    @property
    def n_l(self) -> int:
        return self.plan.n

    @property
    def n_h(self) -> int:
        return len(self.subset_indices)

    @property
    def X_low(self) -> np.ndarray:
        return self.plan.points

    @property
    def X_high(self) -> np.ndarray:
        return self.plan.points[list(self.subset_indices)]


def min_distance(X) -> float:
    """Smallest pairwise Euclidean distance; ``inf`` for fewer than two points."""
    X = np.asarray(X, dtype=float)
    if len(X) < 2:
        return np.inf
    return float(np.sqrt(pdist(X, "sqeuclidean").min()))


def is_latin(X) -> bool:
    X = np.asarray(X, dtype=float)
    n = len(X)
    cells = (np.arange(n) + 0.5) / n
    return all(np.allclose(np.sort(col), cells, rtol=0, atol=1e-12) for col in X.T)


def lhs_plan(n_l: int, d: int, seed: int) -> SamplingPlan:
    if n_l < 2:
        raise SizeError(f"a plan needs at least 2 points, got {n_l}")
    if d < 1:
        raise SizeError(f"dimension must be positive, got {d}")
    rng = np.random.default_rng(seed)
    cols = [rng.permutation(n_l) for _ in range(d)]
    points = (np.column_stack(cols) + 0.5) / n_l
    return SamplingPlan(points, seed)


def _min_excluding(D2: np.ndarray, i: int, j: int) -> float:
    mask = np.ones(len(D2), dtype=bool)
    mask[[i, j]] = False
    sub = D2[np.ix_(mask, mask)]
    if len(sub) < 2:
        return np.inf
    return sub[np.triu_indices(len(sub), k=1)].min()


def optimize_plan(plan: SamplingPlan) -> SamplingPlan:
    """Swap single coordinates between point pairs while the minimum distance grows.

    The scan runs over pairs ``(i, j), i < j`` and then coordinates ``k`` in
    lexicographic order; the first strictly improving swap is applied and
    the scan restarts. The returned plan is a local optimum under single
    coordinate swaps and keeps the Latin property.
    """
    X = np.array(plan.points, dtype=float)
    n, d = X.shape
    if n < 3:
        return SamplingPlan(X, plan.seed)
    D2 = squareform(pdist(X, "sqeuclidean"))
    np.fill_diagonal(D2, np.inf)

    improved = True
    while improved:
        improved = False
        current = D2.min()
        # A swap that leaves some closest pair untouched cannot raise the minimum.
        critical = set(np.unique(np.argwhere(~improves(D2, current))).tolist())
        for i in range(n - 1):
            for j in range(i + 1, n):
                if i not in critical and j not in critical:
                    continue
                for k in range(d):
                    if X[i, k] == X[j, k]:
                        continue
                    xi, xj = X[i].copy(), X[j].copy()
                    xi[k], xj[k] = X[j, k], X[i, k]
                    row_i = np.sum((X - xi) ** 2, axis=1)
                    row_j = np.sum((X - xj) ** 2, axis=1)
                    row_i[[i, j]] = np.inf
                    row_j[[i, j]] = np.inf
                    dij = np.sum((xi - xj) ** 2)
                    candidate = min(row_i.min(), row_j.min(), dij)
                    if not improves(candidate, current):
                        continue
                    candidate = min(candidate, _min_excluding(D2, i, j))
                    if not improves(candidate, current):
                        continue
                    X[i], X[j] = xi, xj
                    D2[i, :] = D2[:, i] = row_i
                    D2[j, :] = D2[:, j] = row_j
                    D2[i, j] = D2[j, i] = dij
                    D2[i, i] = D2[j, j] = np.inf
                    improved = True
                    break
                if improved:
                    break
            if improved:
                break
    return SamplingPlan(X, plan.seed)


def nested_subset(plan: SamplingPlan, n_h: int, seed: int) -> NestedDesign:
    """Choose ``n_h`` plan points that are locally maximin under in/out swaps.

    Starts from a seeded random subset, then scans (inside position,
    outside point) pairs lexicographically, accepting the first swap that
    strictly increases the subset's minimum distance and restarting.
    """
    n = plan.n
    if n_h < 1 or n_h > n:
        raise SizeError(f"n_h must lie in [1, {n}], got {n_h}")
    rng = np.random.default_rng(seed)
    chosen = [int(i) for i in rng.choice(n, size=n_h, replace=False)]
    if n_h in (1, n):
        return NestedDesign(plan, tuple(sorted(chosen)), seed)

    D2 = squareform(pdist(plan.points, "sqeuclidean"))
    np.fill_diagonal(D2, np.inf)

    def subset_min(idx):
        return D2[np.ix_(idx, idx)].min()

    current = subset_min(chosen)
    improved = True
    while improved:
        improved = False
        inside = set(chosen)
        for pos in range(n_h):
            for out in range(n):
                if out in inside:
                    continue
                trial = chosen.copy()
                trial[pos] = out
                # cheap check on the rows touching the incoming point first
                others = [c for p, c in enumerate(chosen) if p != pos]
                if not improves(D2[out, others].min(), current):
                    continue
                value = subset_min(trial)
                if improves(value, current):
                    chosen, current = trial, value
                    improved = True
                    break
            if improved:
                break
    return NestedDesign(plan, tuple(sorted(chosen)), seed)


def write_plan(design: NestedDesign | SamplingPlan, path) -> None:
    """Write a plan as a versioned whitespace-separated table.

    The header records ``n_l``, ``n_h``, ``d`` and ``seed``; each row holds
    a 0/1 high-fidelity flag followed by the unit-cube coordinates, printed
    with ``repr`` so a read-back is bit-identical.
    """
    if isinstance(design, SamplingPlan):
        plan, subset, sub_seed = design, tuple(range(design.n)), design.seed
    else:
        plan, subset, sub_seed = design.plan, design.subset_indices, design.seed
    flags = np.zeros(plan.n, dtype=int)
    flags[list(subset)] = 1
    lines = [
        f"# {PLAN_FORMAT} v{PLAN_VERSION}",
        f"# n_l={plan.n} n_h={len(subset)} d={plan.d} seed={plan.seed} subset_seed={sub_seed}",
    ]
    for flag, row in zip(flags, plan.points):
        lines.append(" ".join([str(flag)] + [repr(float(v)) for v in row]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_plan(path) -> NestedDesign:
    lines = Path(path).read_text().splitlines()
    if len(lines) < 2 or not lines[0].startswith(f"# {PLAN_FORMAT} v"):
        raise SchemaError(f"{path}: not a {PLAN_FORMAT} file")
    version = int(lines[0].split(" v")[-1])
    if version != PLAN_VERSION:
        raise SchemaError(f"{path}: unsupported plan version {version}")
    meta = dict(item.split("=") for item in lines[1].lstrip("# ").split())
    rows = [line.split() for line in lines[2:] if line.strip()]
    flags = [int(r[0]) for r in rows]
    points = np.array([[float(v) for v in r[1:]] for r in rows])
    if points.shape != (int(meta["n_l"]), int(meta["d"])) or sum(flags) != int(meta["n_h"]):
        raise SchemaError(f"{path}: header does not match the table body")
    plan = SamplingPlan(points, int(meta["seed"]))
    subset = tuple(i for i, f in enumerate(flags) if f)
    return NestedDesign(plan, subset, int(meta["subset_seed"]))
