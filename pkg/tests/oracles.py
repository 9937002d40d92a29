"""Independent reference implementations used as test oracles.

These are written from the textbook definitions with plain loops or a
different numerical route than the package code, so agreement is
evidence rather than tautology.
"""

from __future__ import annotations

import itertools
import math
import statistics

import numpy as np


def pearson(x, y) -> float:
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return sxy / math.sqrt(sxx * syy)


def cc(y_l, y_h) -> float:
    return pearson(list(y_l), list(y_h)) ** 2


def rmse(y_l, y_h) -> float:
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(y_l, y_h)) / len(y_l))


def rrmse(y_l, y_h) -> float:
    return rmse(y_l, y_h) / (max(y_h) - min(y_h))


def wcc(y_l, y_h, w) -> float:
    # weighted covariance matrix through numpy's aweights path
    c = np.cov(np.vstack([y_l, y_h]), aweights=w, bias=True)
    return float(c[0, 1] ** 2 / (c[0, 0] * c[1, 1]))


def lcc_at(X, y_l, y_h, centre, r) -> float:
    d = len(centre)
    w = []
    for x in X:
        dist = math.sqrt(sum((a - b) ** 2 for a, b in zip(x, centre)))
        w.append(max(0.0, 1.0 - dist / (r * math.sqrt(d))))
    if sum(1 for v in w if v > 0) < 2:
        return math.nan
    idx = [i for i, v in enumerate(w) if v > 0]
    sub_l = [y_l[i] for i in idx]
    sub_h = [y_h[i] for i in idx]
    if len(set(sub_l)) == 1 or len(set(sub_h)) == 1:
        return math.nan
    return wcc(sub_l, sub_h, [w[i] for i in idx])


def lcc_family(X, y_l, y_h, r, thresholds) -> dict:
    vals = [lcc_at(X, y_l, y_h, x, r) for x in X]
    vals = [v for v in vals if not math.isnan(v)]
    out = {}
    for p in thresholds:
        out[p] = sum(1 for v in vals if v >= p) / len(vals)
    out["mean"] = statistics.fmean(vals)
    out["sd"] = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return out


def adjusted_r2(X, y, interactions=False) -> float:
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    cols = [np.ones(n)] + [X[:, j] for j in range(d)]
    if interactions:
        cols += [X[:, i] * X[:, j] for i in range(d) for j in range(i + 1, d)]
    A = np.column_stack(cols)
    beta = np.linalg.solve(A.T @ A, A.T @ y)  # normal equations
    resid = y - A @ beta
    p = A.shape[1] - 1
    r2 = 1 - float(resid @ resid) / float(((y - y.mean()) ** 2).sum())
    return 1 - (1 - r2) * (n - 1) / (n - p - 1)


def uniformity(F) -> float:
    F = [list(map(float, f)) for f in F]
    nn = []
    for i, fi in enumerate(F):
        nn.append(min(math.dist(fi, fj) for j, fj in enumerate(F) if j != i))
    return 1 - statistics.stdev(nn) / statistics.fmean(nn)


def signed_rank_enumerated(a, b, tol=0.001) -> float:
    """P(T+ <= observed) by enumerating every sign pattern (Pratt zeros)."""
    diff = [x - y + tol for x, y in zip(a, b)]
    absd = [abs(v) for v in diff]
    order = sorted(range(len(diff)), key=lambda i: absd[i])
    ranks = [0.0] * len(diff)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and absd[order[j + 1]] == absd[order[i]]:
            j += 1
        for k in range(i, j + 1):
            ranks[order[k]] = (i + j) / 2 + 1
        i = j + 1
    t_obs = sum(r for r, v in zip(ranks, diff) if v > 0)
    active = [r for r, v in zip(ranks, diff) if v != 0]
    hits = 0
    for signs in itertools.product((0, 1), repeat=len(active)):
        if sum(r for r, s in zip(active, signs) if s) <= t_obs + 1e-9:
            hits += 1
    return hits / 2 ** len(active)


def greedy_filter(F, labels, tiers, ids, theta, label_aware):
    """Textbook removal loop, written independently of the package."""
    order = sorted(range(len(F)), key=lambda i: (tiers[i], ids[i]), reverse=True)
    alive = set(range(len(F)))
    for i in order:
        for j in alive:
            if j == i:
                continue
            if math.dist(F[i], F[j]) <= theta and (not label_aware or labels[i] == labels[j]):
                alive.discard(i)
                break
    return sorted(ids[i] for i in alive)
