"""Choosing between Kriging and Co-Kriging from sample features."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.linear_model import LogisticRegression
from sklearn.utils.validation import check_is_fitted

from .exceptions import SelectionError, SizeError

KRIGING = "Kriging"
COKRIGING = "CoKriging"

# Rows follow PROJECTION_INPUTS; columns are (z1, z2).
PROJECTION = np.array(
    [
        [-0.4916, -0.0889],
        [-0.3167, -0.2321],
        [-0.1506, 0.372],
        [-0.0568, 0.4394],
        [0.1777, -0.4154],
        [0.3696, 0.0989],
        [0.4362, 0.0526],
        [0.177, 0.3381],
        [0.4031, 0.2545],
    ]
)
PROJECTION.setflags(write=False)

# The two f_h landscape inputs are not computed here; callers supply them or leave them at 0.
PROJECTION_INPUTS = (
    "br",
    "lcc_r02_sd",
    "lcc_rd_p0.4",
    "lcc_rd_p0.95",
    "rrmse",
    "h_mmce_lda_0.5",
    "h_h0",
    "diff_r2_l",
    "diff_r2_li",
)
EXTERNAL_INPUTS = ("h_mmce_lda_0.5", "h_h0")


def project_2d(v) -> np.ndarray:
    """``(z1, z2)`` of a transformed nine-feature vector, or of each row of a matrix."""
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != PROJECTION.shape[0]:
        raise SizeError(f"expected {PROJECTION.shape[0]} features, got {v.shape[-1]}")
    return v @ PROJECTION


class ProjectionTransformer(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping `project_2d`."""

    def fit(self, X, y=None):
        self.n_features_in_ = PROJECTION.shape[0]
        return self

    def transform(self, X):
        return project_2d(np.atleast_2d(X))

    def get_feature_names_out(self, input_features=None):
        return np.array(["z1", "z2"], dtype=object)


@dataclass(frozen=True)
class Decision:
    choice: str
    rule_fired: str
    inputs: dict = field(default_factory=dict)


def _require(name, value):
    if value is None or not math.isfinite(value):
        raise SelectionError(f"missing or non-finite input: {name}")
    return float(value)


RULE_INPUTS = ("br_h", "br", "lcc_rd_p0.4", "lcc_rd_p0.95", "diff_r2_l")


def _apply_rules(get, threshold: float) -> tuple[str, str]:
    if get("br_h") >= 18:
        return KRIGING, "1a"
    if get("br") >= 1:
        return KRIGING, "1b"
    if get("lcc_rd_p0.4") <= 0.7:
        return KRIGING, "1c"
    if get("lcc_rd_p0.95") >= threshold:
        return COKRIGING, "2a"
    if get("diff_r2_l") >= 0.4:
        return COKRIGING, "2b"
    if get("br_h") <= 5:
        return COKRIGING, "3a"
    return KRIGING, "3b"


def rule_select(br_h, br, lcc_04, lcc_095, r2_l, lcc_095_threshold: float = 0.5) -> Decision:
    """Three-step rule set; the first matching clause decides.

    Clause ids: ``1a`` ``B^r_h >= 18``, ``1b`` ``B^r = 1``, ``1c``
    ``LCC_0.4 <= 0.7`` (all Kriging); ``2a`` ``LCC_0.95 >= threshold``,
    ``2b`` ``R2_L >= 0.4`` (Co-Kriging); ``3a`` ``B^r_h <= 5`` (Co-Kriging),
    ``3b`` otherwise (Kriging). Both LCC inputs use radius ``0.2**(1/d)``
    and ``R2_L`` is that of ``f_h - f_l``.
    """
    inputs = {name: _require(name, value)
              for name, value in zip(RULE_INPUTS, (br_h, br, lcc_04, lcc_095, r2_l))}
    choice, fired = _apply_rules(inputs.__getitem__, lcc_095_threshold)
    return Decision(choice, fired, inputs)


def rule_select_row(row: dict, lcc_095_threshold: float = 0.5) -> Decision:
    """`rule_select` on a raw-feature mapping such as a metadata row.

    Inputs are read as the clauses need them, so a missing value only
    raises when the decision actually depends on it.
    """
    used = {}

    def get(name):
        used[name] = _require(name, row.get(name))
        return used[name]

    choice, fired = _apply_rules(get, lcc_095_threshold)
    return Decision(choice, fired, used)


def cc_baseline_select(cc: float) -> Decision:
    """Co-Kriging when ``CC >= 0.7``, Kriging otherwise."""
    cc = _require("cc", cc)
    if cc >= 0.7:
        return Decision(COKRIGING, "cc>=0.7", {"cc": cc})
    return Decision(KRIGING, "cc<0.7", {"cc": cc})


class ProjectedSelector(ClassifierMixin, BaseEstimator):
    """Logistic model on ``(z1, z2)`` predicting whether Kriging is good.

    The selector picks Kriging where Kriging is predicted good and
    Co-Kriging elsewhere. Fitting is deterministic (L-BFGS from zero).

    Parameters
    ----------
    C : float, default=1.0
        Inverse L2 regularisation strength.
    min_rows : int, default=20
        Smallest training set accepted.
    """

    def __init__(self, C: float = 1.0, min_rows: int = 20):
        self.C = C
        self.min_rows = min_rows

    def fit(self, Z, y):
        Z = np.asarray(Z, dtype=float)
        y = np.asarray(y).astype(int)
        if Z.ndim != 2 or Z.shape[1] != 2:
            raise SizeError("expected an (n, 2) matrix of projected coordinates")
        if len(Z) < self.min_rows:
            raise SelectionError(f"need at least {self.min_rows} labelled rows, got {len(Z)}")
        if len(np.unique(y)) < 2:
            raise SelectionError("training labels contain a single class")
        self.model_ = LogisticRegression(C=self.C, solver="lbfgs").fit(Z, y)
        self.classes_ = self.model_.classes_
        self.n_features_in_ = 2
        self.training_accuracy_ = float(self.model_.score(Z, y))
        return self

    def predict_kriging_good(self, Z) -> np.ndarray:
        check_is_fitted(self, "model_")
        return self.model_.predict(np.atleast_2d(np.asarray(Z, dtype=float))).astype(int)

    def predict(self, Z) -> np.ndarray:
        good = self.predict_kriging_good(Z)
        return np.where(good == 1, KRIGING, COKRIGING)

    def score(self, Z, y, sample_weight=None):
        """Accuracy of the Kriging-good prediction against ``y``."""
        good = self.predict_kriging_good(Z)
        return float(np.average(good == np.asarray(y).astype(int), weights=sample_weight))


def train_classifier(Z, good_kriging, C: float = 1.0) -> ProjectedSelector:
    return ProjectedSelector(C=C).fit(Z, good_kriging)


def classify(classifier: ProjectedSelector, z) -> str:
    return str(classifier.predict(np.atleast_2d(z))[0])
