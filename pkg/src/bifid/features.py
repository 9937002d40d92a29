"""Instance features computed from the training sample only.

Relationship features compare the two sources on the points where both
are known (the high-fidelity points of a nested design). Local correlation
(LCC) features need the points scaled to the unit cube. Nothing in this
module accepts the large test sample used for model accuracy.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import boxcox
from scipy.stats import boxcox_llf
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DataError, SizeError, UndefinedCorrelationError, UndefinedFeatureError

LCC_THRESHOLDS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.975)
RADIUS_TAGS = ("r02", "rd")


def _pair(y_l, y_h):
    y_l = np.asarray(y_l, dtype=float).reshape(-1)
    y_h = np.asarray(y_h, dtype=float).reshape(-1)
    if len(y_l) != len(y_h):
        raise SizeError(f"length mismatch: {len(y_l)} low vs {len(y_h)} high values")
    if len(y_l) < 2:
        raise SizeError("need at least two paired values")
    return y_l, y_h


def cc(y_l, y_h) -> float:
    """Squared Pearson correlation between the two sources."""
    y_l, y_h = _pair(y_l, y_h)
    n = len(y_l)
    dl, dh = y_l - y_l.mean(), y_h - y_h.mean()
    s_l = math.sqrt(np.sum(dl**2) / (n - 1))
    s_h = math.sqrt(np.sum(dh**2) / (n - 1))
    if s_l == 0 or s_h == 0:
        raise UndefinedCorrelationError("CC is undefined for a constant source")
    r = np.sum(dl * dh) / (n - 1) / (s_l * s_h)
    return float(min(r * r, 1.0))


def rmse(y_l, y_h) -> float:
    y_l, y_h = _pair(y_l, y_h)
    return float(math.sqrt(np.mean((y_l - y_h) ** 2)))


def rrmse(y_l, y_h) -> float:
    """RMSE divided by the range of the high-fidelity values."""
    y_l, y_h = _pair(y_l, y_h)
    spread = np.max(y_h) - np.min(y_h)
    if spread == 0:
        raise UndefinedFeatureError("RRMSE is undefined for constant high-fidelity values")
    return rmse(y_l, y_h) / float(spread)


def wcc(y_l, y_h, w) -> float:
    """Weighted squared correlation with weighted (biased) standard deviations."""
    y_l, y_h = _pair(y_l, y_h)
    w = np.asarray(w, dtype=float).reshape(-1)
    if len(w) != len(y_l) or np.any(w < 0):
        raise ValueError("weights must be non-negative and match the data length")
    total = w.sum()
    if total <= 0:
        raise UndefinedCorrelationError("all weights are zero")
    m_l = np.sum(w * y_l) / total
    m_h = np.sum(w * y_h) / total
    s_l = math.sqrt(np.sum(w * (y_l - m_l) ** 2) / total)
    s_h = math.sqrt(np.sum(w * (y_h - m_h) ** 2) / total)
    if s_l == 0 or s_h == 0:
        raise UndefinedCorrelationError("weighted variance is zero")
    S = np.sum(w * (y_l - m_l) * (y_h - m_h))
    r = S / total / (s_l * s_h)
    return float(min(r * r, 1.0))


def lcc_weights(X, centre, r) -> np.ndarray:
    """Linear-decay weights inside a ball of radius ``r * sqrt(d)``.

    ``w_i = max(0, 1 - |x - x_i| / (r * sqrt(d)))`` for unit-cube data.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = X.shape[1]
    dist = np.linalg.norm(X - np.asarray(centre, dtype=float), axis=1)
    return np.maximum(0.0, 1.0 - dist / (r * math.sqrt(d)))


def lcc_at(X, y_l, y_h, centre, r) -> float:
    """Local correlation around ``centre``; NaN where it is undefined.

    Undefined means fewer than two points with positive weight, or zero
    weighted variance of either source inside the ball.
    """
    w = lcc_weights(X, centre, r)
    if np.count_nonzero(w) < 2:
        return math.nan
    try:
        return wcc(y_l, y_h, w)
    except UndefinedCorrelationError:
        return math.nan


def radius_for(tag: str, d: int) -> float:
    if tag == "r02":
        return 0.2
    if tag == "rd":
        return 0.2 ** (1.0 / d)
    raise ValueError(f"unknown radius tag {tag!r}")


def _p_label(p: float) -> str:
    return f"{p:g}"


def summarize_lcc(values, thresholds: Sequence[float] = LCC_THRESHOLDS) -> dict:
    """Threshold fractions, mean, sd and coefficient of variation of local values.

    Undefined (NaN) local values are dropped first. A single remaining value
    has sd 0; no remaining values gives NaN for every entry.
    """
    vals = np.asarray(values, dtype=float)
    vals = vals[np.isfinite(vals)]
    out = {}
    if len(vals) == 0:
        for p in thresholds:
            out[f"p{_p_label(p)}"] = math.nan
        out.update(mean=math.nan, sd=math.nan, coeff=math.nan)
        return out
    for p in thresholds:
        out[f"p{_p_label(p)}"] = float(np.count_nonzero(vals >= p)) / len(vals)
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    out["mean"] = mean
    out["sd"] = sd
    out["coeff"] = sd / mean if mean > 0 else math.nan
    return out


def lcc_features(X, y_l, y_h, r: float, thresholds: Sequence[float] = LCC_THRESHOLDS) -> dict:
    """LCC summary with every sample point used as a centre."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y_l, y_h = _pair(y_l, y_h)
    local = [lcc_at(X, y_l, y_h, x, r) for x in X]
    return summarize_lcc(local, thresholds)


def budget_features(n_h: int, n_l: int, d: int) -> dict:
    if not 1 <= n_h <= n_l:
        raise SizeError(f"need 1 <= n_h <= n_l, got n_h={n_h}, n_l={n_l}")
    return {
        "b_h": float(n_h),
        "b_l": float(n_l),
        "br_h": n_h / d,
        "br_l": n_l / d,
        "br": n_h / n_l,
        "dim": float(d),
    }


class AdjustedR2(NamedTuple):
    value: float
    saturated: bool


def adjusted_r2_linear(X, y, with_interactions: bool = False) -> AdjustedR2:
    """Adjusted R^2 of a least-squares linear model (optionally with pairwise products).

    A design that is rank deficient or leaves no residual degrees of
    freedom fits any sample exactly; it is reported as ``(1.0, True)``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).reshape(-1)
    n, d = X.shape
    if len(y) != n:
        raise SizeError("X and y differ in length")
    cols = [np.ones(n), *X.T]
    if with_interactions:
        cols += [X[:, i] * X[:, j] for i, j in combinations(range(d), 2)]
    A = np.column_stack(cols)
    p = A.shape[1] - 1
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0:
        raise UndefinedFeatureError("adjusted R^2 is undefined for a constant response")
    if n - p - 1 <= 0 or np.linalg.matrix_rank(A) < A.shape[1]:
        return AdjustedR2(1.0, True)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    sse = float(np.sum((y - A @ coef) ** 2))
    r2 = 1.0 - sse / sst
    return AdjustedR2(1.0 - (1.0 - r2) * (n - 1) / (n - p - 1), False)


# ---------------------------------------------------------------------------
# Feature catalogue and per-sample computation


def lcc_feature_ids(tag: str) -> list[str]:
    return [f"lcc_{tag}_p{_p_label(p)}" for p in LCC_THRESHOLDS] + [
        f"lcc_{tag}_{s}" for s in ("mean", "sd", "coeff")
    ]


FEATURE_IDS: tuple[str, ...] = tuple(
    ["cc", "rrmse"]
    + lcc_feature_ids("r02")
    + lcc_feature_ids("rd")
    + ["b_h", "b_l", "br_h", "br_l", "br", "dim"]
    + ["h_r2_l", "h_r2_li", "diff_r2_l", "diff_r2_li"]
)


def feature_range(feature_id: str) -> tuple[float, float] | None:
    """Known range of a feature, or None for unbounded features."""
    if feature_id in ("rrmse",) or feature_id.endswith("_coeff"):
        return None
    if feature_id in ("b_h", "b_l"):
        return (2.0, 400.0)
    if feature_id in ("br_h", "br_l"):
        return (2.0, 20.0)
    if feature_id == "dim":
        return (1.0, 20.0)
    return (0.0, 1.0)


def _safe(fn, *args) -> float:
    try:
        return float(fn(*args))
    except UndefinedFeatureError:
        return math.nan


def sample_features(X_h, y_l_at_h, y_h, n_l: int) -> dict:
    """Raw features of one training sample.

    Parameters
    ----------
    X_h : array of shape (n_h, d)
        High-fidelity points in unit-cube coordinates.
    y_l_at_h, y_h : arrays of shape (n_h,)
        Both sources at those points.
    n_l : int
        Size of the low-fidelity sample (only its count enters the features).
    """
    X_h = np.atleast_2d(np.asarray(X_h, dtype=float))
    y_l_at_h = np.asarray(y_l_at_h, dtype=float)
    y_h = np.asarray(y_h, dtype=float)
    n_h, d = X_h.shape
    out = {"cc": _safe(cc, y_l_at_h, y_h), "rrmse": _safe(rrmse, y_l_at_h, y_h)}
    for tag in RADIUS_TAGS:
        summary = lcc_features(X_h, y_l_at_h, y_h, radius_for(tag, d))
        out.update({f"lcc_{tag}_{k}": v for k, v in summary.items()})
    out.update(budget_features(n_h, n_l, d))
    diff = y_h - y_l_at_h
    for prefix, target in (("h", y_h), ("diff", diff)):
        for suffix, inter in (("l", False), ("li", True)):
            try:
                value = adjusted_r2_linear(X_h, target, inter).value
            except UndefinedFeatureError:
                value = math.nan
            out[f"{prefix}_r2_{suffix}"] = value
    return {k: out[k] for k in FEATURE_IDS}


@dataclass
class FeatureVector:
    values: dict[str, float]
    counts: dict[str, int] = field(default_factory=dict)
    provenance: str = "raw"

    def missing(self) -> list[str]:
        return [k for k, v in self.values.items() if not math.isfinite(v)]


def sample_feature_vector(repetitions: Sequence[dict]) -> FeatureVector:
    """Average each feature over the repetitions where it is defined."""
    if len(repetitions) == 0:
        raise SizeError("need at least one repetition")
    keys = list(repetitions[0])
    values, counts = {}, {}
    for key in keys:
        column = np.array([rep[key] for rep in repetitions], dtype=float)
        ok = np.isfinite(column)
        counts[key] = int(ok.sum())
        values[key] = float(column[ok].mean()) if ok.any() else math.nan
    return FeatureVector(values, counts)


# ---------------------------------------------------------------------------
# Transformation


BOXCOX_LAMBDAS = np.round(np.arange(-2.0, 2.0 + 1e-9, 0.05), 2)


class FeatureTransformer(TransformerMixin, BaseEstimator):
    """Bring features onto comparable scales.

    Bounded columns are mapped affinely from their known range onto
    ``[-2, 2]``. Unbounded columns are shifted to be positive, Box-Cox
    transformed with a per-column lambda picked by profile likelihood over
    ``BOXCOX_LAMBDAS``, standardised, and clamped to ``[-4, 4]``.

    Parameters
    ----------
    ranges : sequence of (low, high) or None
        One entry per column; None marks an unbounded column.
    feature_names : sequence of str, optional
        Used in error messages and in the saved parameters.
    missing : {"raise", "zero"}, default="raise"
        What to do with non-finite raw values. ``"zero"`` maps them to 0,
        the centre of every transformed scale.
    """

    def __init__(self, ranges=None, feature_names=None, missing="raise"):
        self.ranges = ranges
        self.feature_names = feature_names
        self.missing = missing

    def _names(self, k):
        return list(self.feature_names) if self.feature_names is not None else [f"x{i}" for i in range(k)]

    def _check(self, X, instance_ids=None):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise DataError("expected a 2-d feature matrix")
        if self.missing == "raise":
            bad = np.argwhere(~np.isfinite(X))
            if len(bad):
                i, j = bad[0]
                who = instance_ids[i] if instance_ids is not None else f"row {i}"
                raise DataError(f"non-finite raw value for instance {who}, feature {self._names(X.shape[1])[j]}")
        elif self.missing != "zero":
            raise ValueError(f"missing must be 'raise' or 'zero', got {self.missing!r}")
        return X

    def fit(self, X, y=None, instance_ids=None):
        X = self._check(X, instance_ids)
        n, k = X.shape
        if n < 1:
            raise SizeError("need at least one instance to fit the transform")
        ranges = list(self.ranges) if self.ranges is not None else [None] * k
        if len(ranges) != k:
            raise DataError(f"{len(ranges)} ranges given for {k} columns")
        self.n_features_in_ = k
        self.params_ = []
        for j in range(k):
            col = X[:, j]
            col = col[np.isfinite(col)]
            if ranges[j] is not None:
                lo, hi = map(float, ranges[j])
                self.params_.append({"kind": "linear", "low": lo, "high": hi})
                continue
            if len(col) == 0:
                self.params_.append({"kind": "boxcox", "shift": 0.0, "lambda": 1.0, "mean": 0.0, "sd": 0.0})
                continue
            shift = 1.0 - float(col.min()) if col.min() <= 0 else 0.0
            shifted = col + shift
            if np.ptp(shifted) == 0:
                lam = 1.0
            else:
                llf = [boxcox_llf(lam, shifted) for lam in BOXCOX_LAMBDAS]
                lam = float(BOXCOX_LAMBDAS[int(np.nanargmax(llf))])
            z = boxcox(shifted, lam)
            self.params_.append(
                {"kind": "boxcox", "shift": shift, "lambda": lam,
                 "mean": float(z.mean()), "sd": float(z.std())}
            )
        return self

    def transform(self, X, instance_ids=None):
        check_is_fitted(self, "params_")
        X = self._check(X, instance_ids)
        if X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        out = np.empty_like(X)
        for j, prm in enumerate(self.params_):
            col = X[:, j]
            if prm["kind"] == "linear":
                lo, hi = prm["low"], prm["high"]
                t = np.clip(4.0 * (col - lo) / (hi - lo) - 2.0, -2.0, 2.0)
            else:
                shifted = np.maximum(col + prm["shift"], np.finfo(float).tiny)
                z = boxcox(shifted, prm["lambda"])
                if prm["sd"] > 0:
                    t = np.clip((z - prm["mean"]) / prm["sd"], -4.0, 4.0)
                else:
                    t = np.zeros_like(col)
            out[:, j] = np.where(np.isfinite(col), t, 0.0)
        return out

    def fit_transform(self, X, y=None, instance_ids=None):
        return self.fit(X, instance_ids=instance_ids).transform(X, instance_ids=instance_ids)

    def to_json(self) -> str:
        check_is_fitted(self, "params_")
        names = self._names(self.n_features_in_)
        return json.dumps(
            {"format": "bifid-transform", "version": 1,
             "features": [dict(name=n, **p) for n, p in zip(names, self.params_)]},
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str, missing: str = "raise") -> "FeatureTransformer":
        data = json.loads(text)
        if data.get("format") != "bifid-transform" or data.get("version") != 1:
            raise DataError("unsupported transform parameter file")
        feats = data["features"]
        names = [f["name"] for f in feats]
        ranges = [(f["low"], f["high"]) if f["kind"] == "linear" else None for f in feats]
        obj = cls(ranges=ranges, feature_names=names, missing=missing)
        obj.params_ = [{k: v for k, v in f.items() if k != "name"} for f in feats]
        obj.n_features_in_ = len(feats)
        return obj


def transform_features(raw, feature_names: Sequence[str], instance_ids=None, missing="raise"):
    """Fit and apply `FeatureTransformer` using the catalogue ranges.

    Returns the transformed matrix and the fitted transformer.
    """
    ranges = [feature_range(name) for name in feature_names]
    tf = FeatureTransformer(ranges=ranges, feature_names=list(feature_names), missing=missing)
    return tf.fit_transform(np.asarray(raw, dtype=float), instance_ids=instance_ids), tf
