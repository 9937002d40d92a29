"""Kriging and Co-Kriging surrogates.

Both models use an anisotropic squared-exponential correlation

    R(x, x') = exp(-0.5 * sum_k ((x_k - x'_k) / l_k) ** 2)

with a constant trend. Hyperparameters are found by maximising the
concentrated log-likelihood, in which the trend and the process variance
are replaced by their closed-form generalised-least-squares estimates, so
the optimiser only searches over the log length scales.

Co-Kriging follows the autoregressive two-step scheme: a Kriging model of
the low fidelity, then a Kriging model of ``y_h - rho * y_l`` on the
(nested) high-fidelity points. ``rho`` enters the difference model's trend
linearly and is therefore profiled out by GLS for each candidate set of
length scales, then clipped to ``RHO_BOUNDS``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from scipy.stats import qmc
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    DataError,
    DegeneracyError,
    DesignError,
    SchemaError,
    UndefinedCorrelationError,
)
from .testbed import FunctionPair, Hypercube

MODEL_FORMAT = "bifid-model"
MODEL_VERSION = 1

LOG_LENGTH_BOUNDS = (np.log(1e-2), np.log(1e2))
RHO_BOUNDS = (-5.0, 5.0)
BASE_NUGGET = 1e-10
MAX_NUGGET = 1e-4
# Process variances below this fraction of the data variance are floored so
# the concentrated likelihood stays finite for (near) exactly fitted data.
_SIGMA2_FLOOR = 1e-14
# With a nugget the posterior mean misses training value i by nugget * alpha_i.
# Length scales whose miss exceeds this fraction of the data range are
# infeasible, which keeps the model interpolating at any dimension/size.
INTERPOLATION_RTOL = 1e-8
_INFEASIBLE = -1e8


def correlation(A, B, length_scales) -> np.ndarray:
    ls = np.asarray(length_scales, dtype=float)
    return np.exp(-0.5 * cdist(A / ls, B / ls, "sqeuclidean"))


def _factorize(X, length_scales, nugget, max_nugget):
    """Cholesky of R + nugget*I, escalating the nugget tenfold on failure."""
    R = correlation(X, X, length_scales)
    n = len(X)
    while True:
        try:
            L = cholesky(R + nugget * np.eye(n), lower=True, check_finite=False)
            return L, nugget
        except np.linalg.LinAlgError:
            if nugget >= max_nugget:
                return None, nugget
            nugget = min(nugget * 10, max_nugget)


@dataclass
class _GLSFit:
    loglik: float
    beta: np.ndarray
    sigma2: float
    nugget: float
    L: np.ndarray
    miss: float

    def objective(self, spread: float) -> float:
        """Likelihood, or a graded penalty when interpolation is violated."""
        ratio = self.miss / (INTERPOLATION_RTOL * spread)
        if ratio <= 1:
            return self.loglik
        return _INFEASIBLE * (1 + np.log(ratio))


def _gls(X, y, F, length_scales, nugget, max_nugget, beta_bounds=None):
    """Concentrated likelihood of ``y ~ F beta + GP(0, sigma2 R)``.

    ``beta_bounds`` optionally clips coefficients after the first (the
    intercept is never bounded); the intercept is then re-estimated with
    the clipped coefficients held fixed.
    """
    L, used = _factorize(X, length_scales, nugget, max_nugget)
    if L is None:
        return None
    n = len(y)
    Fw = solve_triangular(L, F, lower=True, check_finite=False)
    yw = solve_triangular(L, y, lower=True, check_finite=False)
    beta, *_ = np.linalg.lstsq(Fw, yw, rcond=None)
    if beta_bounds is not None and F.shape[1] > 1:
        lo, hi = beta_bounds
        clipped = np.clip(beta[1:], lo, hi)
        if np.any(clipped != beta[1:]):
            rest = yw - Fw[:, 1:] @ clipped
            mu = (Fw[:, 0] @ rest) / (Fw[:, 0] @ Fw[:, 0])
            beta = np.concatenate([[mu], clipped])
    resid = yw - Fw @ beta
    sigma2 = max(float(resid @ resid) / n, _SIGMA2_FLOOR)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    loglik = -0.5 * n * np.log(sigma2) - 0.5 * logdet
    alpha = solve_triangular(L, resid, lower=True, trans="T", check_finite=False)
    miss = used * float(np.max(np.abs(alpha)))
    return _GLSFit(loglik, beta, sigma2, used, L, miss)


def _multistart(objective, d, n_starts, seed, maxiter):
    """Maximise ``objective`` over log length scales; returns (best_x, best_value, start_values)."""
    lo, hi = LOG_LENGTH_BOUNDS
    rng = np.random.default_rng(seed)
    starts = rng.uniform(lo, hi, size=(n_starts, d))

    def neg(theta):
        value = objective(theta)
        return 1e100 if not np.isfinite(value) else -value

    best_x, best_val = None, -np.inf
    start_values = []
    for x0 in starts:
        v0 = objective(x0)
        start_values.append(v0)
        if v0 > best_val:
            best_x, best_val = x0.copy(), v0
        res = minimize(
            neg, x0, method="Nelder-Mead", bounds=[(lo, hi)] * d,
            options={"maxiter": maxiter * d, "xatol": 1e-4, "fatol": 1e-9},
        )
        value = -res.fun if res.fun < 1e100 else -np.inf
        if value > best_val:
            best_x, best_val = np.asarray(res.x, dtype=float), value
    return best_x, best_val, np.array(start_values)


def _check_training(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or len(X) != len(y):
        raise DataError(f"X has shape {X.shape} but y has {len(y)} values")
    if len(y) < 2:
        raise DataError("at least two training points are required")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("training data contains non-finite values")
    if len(np.unique(X, axis=0)) != len(X):
        raise DegeneracyError("training points must be distinct")
    return X, y


class _Scaler:
    """Maps domain coordinates onto the unit cube when bounds are known."""

    def __init__(self, bounds):
        self.domain = None if bounds is None else Hypercube(*np.asarray(bounds, dtype=float).T)

    def __call__(self, X, check=True):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if self.domain is None or self.domain.d == 1 else X.reshape(1, -1)
        if self.domain is None:
            return X
        if check:
            X = self.domain.check(X)
        return self.domain.to_unit(X)


class KrigingRegressor(RegressorMixin, BaseEstimator):
    """Ordinary Kriging with maximum-likelihood length scales.

    Parameters
    ----------
    bounds : array-like of shape (d, 2), optional
        Domain box. When given, inputs are rescaled to the unit cube before
        fitting and `predict` rejects points outside the box. Without it the
        inputs are used as they are, so they should already be of unit scale.
    n_starts : int, default=10
        Number of seeded Nelder-Mead starts.
    nugget : float, default=1e-10
        Initial diagonal jitter, escalated tenfold up to ``max_nugget`` when
        the Cholesky factorization fails.
    max_nugget : float, default=1e-4
    maxiter : int, default=200
        Nelder-Mead iterations per start and per dimension.
    random_state : int, default=0

    Attributes
    ----------
    length_scales_ : ndarray of shape (d,)
        In unit-cube coordinates when ``bounds`` is set.
    trend_mean_, process_variance_, nugget_ : float
    log_likelihood_ : float
        Concentrated log-likelihood at the returned length scales.
    start_log_likelihoods_ : ndarray
        Likelihood at each start point, before local refinement.
    constant_ : bool
        True when the training values were constant and the model reduced
        to a constant predictor.
    """

    def __init__(self, bounds=None, n_starts=10, nugget=BASE_NUGGET, max_nugget=MAX_NUGGET,
                 maxiter=200, random_state=0):
        self.bounds = bounds
        self.n_starts = n_starts
        self.nugget = nugget
        self.max_nugget = max_nugget
        self.maxiter = maxiter
        self.random_state = random_state

    def fit(self, X, y):
        self._scaler = _Scaler(self.bounds)
        X, y = _check_training(self._scaler(X), y)
        self._fit_unit(X, y)
        return self

    def _fit_unit(self, X, y, regressor=None, length_scales=None):
        """Fit on unit-scale inputs.

        ``regressor`` adds a second trend column (the Co-Kriging ``rho`` term),
        ``length_scales`` skips the likelihood search.
        """
        n, d = X.shape
        self.X_train_, self.y_train_ = X, y
        self.n_features_in_ = d
        self.rho_ = 0.0
        offset, scale = float(np.mean(y)), float(np.std(y))
        if scale == 0 or np.ptp(y) <= 1e-14 * max(1.0, np.max(np.abs(y))):
            self._set_constant(float(np.mean(y)), d)
            return

        ys = (y - offset) / scale
        F = np.ones((n, 1))
        if regressor is not None:
            z = (np.asarray(regressor, dtype=float) - np.mean(regressor)) / scale
            if np.ptp(z) > 0:
                F = np.column_stack([F, z])

        def fit_at(log_ls):
            return _gls(X, ys, F, np.exp(log_ls), self.nugget, self.max_nugget, RHO_BOUNDS)

        spread = float(np.ptp(ys))

        def objective(log_ls):
            fit = fit_at(log_ls)
            return -np.inf if fit is None else fit.objective(spread)

        if length_scales is None:
            best, _, starts = _multistart(objective, d, self.n_starts, self.random_state, self.maxiter)
            self.start_log_likelihoods_ = starts
        else:
            best = np.log(np.asarray(length_scales, dtype=float))
            self.start_log_likelihoods_ = np.array([])
        fit = None if best is None else fit_at(best)
        if fit is None:
            raise DegeneracyError("correlation matrix could not be factorized at any nugget")

        self.constant_ = False
        self.length_scales_ = np.exp(best)
        self.log_likelihood_ = float(fit.objective(spread))
        self.nugget_ = float(fit.nugget)
        self.rho_ = float(fit.beta[1]) if len(fit.beta) > 1 else 0.0
        if regressor is not None:
            # Re-express as plain ordinary Kriging on y - rho * regressor.
            self.y_train_ = y - self.rho_ * np.asarray(regressor, dtype=float)
        target = self.y_train_
        self._L = fit.L
        ones = np.ones(n)
        Li1 = cho_solve((self._L, True), ones, check_finite=False)
        self.trend_mean_ = float(Li1 @ target / (Li1 @ ones))
        self._alpha = cho_solve((self._L, True), target - self.trend_mean_, check_finite=False)
        self.process_variance_ = float(fit.sigma2) * scale**2

    def _set_constant(self, value, d):
        self.constant_ = True
        self.trend_mean_ = value
        self.process_variance_ = 0.0
        self.length_scales_ = np.ones(d)
        self.nugget_ = float(self.nugget)
        self.log_likelihood_ = np.nan
        self.start_log_likelihoods_ = np.array([])
        self._alpha = np.zeros(len(self.X_train_))
        self._L = None

    def _predict_unit(self, U, return_var=False):
        if self.constant_:
            mean = np.full(len(U), self.trend_mean_)
            return (mean, np.zeros(len(U))) if return_var else mean
        r = correlation(U, self.X_train_, self.length_scales_)
        mean = self.trend_mean_ + r @ self._alpha
        if not return_var:
            return mean
        v = solve_triangular(self._L, r.T, lower=True, check_finite=False)
        var = self.process_variance_ * (1.0 - np.sum(v**2, axis=0))
        return mean, np.maximum(var, 0.0)

    def predict(self, X, return_var=False):
        """Predictive mean, and optionally the Kriging variance.

        The variance is ``sigma2 * (1 - r' R^-1 r)``, which is zero at the
        training points and tends to the process variance far from the data.
        """
        check_is_fitted(self, "trend_mean_")
        return self._predict_unit(self._scaler(X), return_var)


class CoKrigingRegressor(RegressorMixin, BaseEstimator):
    """Autoregressive two-fidelity Co-Kriging.

    Predicts ``rho * m_low(x) + m_diff(x)`` where ``m_low`` is Kriging on the
    low-fidelity data and ``m_diff`` is Kriging on ``y_h - rho * y_l`` at the
    high-fidelity points. High-fidelity points must be a subset of the
    low-fidelity points.

    Parameters are those of `KrigingRegressor`; ``random_state`` seeds the
    difference model and ``random_state + 1`` the low-fidelity model.
    """

    def __init__(self, bounds=None, n_starts=10, nugget=BASE_NUGGET, max_nugget=MAX_NUGGET,
                 maxiter=200, random_state=0):
        self.bounds = bounds
        self.n_starts = n_starts
        self.nugget = nugget
        self.max_nugget = max_nugget
        self.maxiter = maxiter
        self.random_state = random_state

    def _kriging(self, seed):
        return KrigingRegressor(None, self.n_starts, self.nugget, self.max_nugget, self.maxiter, seed)

    def fit(self, X, y, X_low, y_low):
        self._scaler = _Scaler(self.bounds)
        Xh, yh = _check_training(self._scaler(X), y)
        Xl, yl = _check_training(self._scaler(X_low), y_low)
        if Xh.shape[1] != Xl.shape[1]:
            raise DesignError("high- and low-fidelity points differ in dimension")
        # nested design: locate each high-fidelity point among the low ones
        dist = cdist(Xh, Xl)
        match = np.argmin(dist, axis=1)
        if np.any(dist[np.arange(len(Xh)), match] > 1e-12):
            raise DesignError("high-fidelity points must be a subset of the low-fidelity points")
        yl_at_h = yl[match]
        self.n_features_in_ = Xh.shape[1]

        self.low_model_ = self._kriging(self.random_state + 1)
        self.low_model_._fit_unit(Xl, yl)

        self.diff_model_ = self._kriging(self.random_state)
        if _is_affine(yl_at_h, yh):
            # y_h is (numerically) an exact affine image of y_l: the
            # difference process is a constant and the likelihood in rho is
            # unbounded, so take the least-squares slope directly.
            slope = float(np.polyfit(yl_at_h, yh, 1)[0]) if np.ptp(yl_at_h) > 0 else 0.0
            self.rho_ = float(np.clip(slope, *RHO_BOUNDS))
            self.diff_model_.X_train_ = Xh
            self.diff_model_.y_train_ = yh - self.rho_ * yl_at_h
            self.diff_model_.n_features_in_ = Xh.shape[1]
            self.diff_model_._set_constant(float(np.mean(self.diff_model_.y_train_)), Xh.shape[1])
            self.diff_model_.rho_ = self.rho_
        else:
            self.diff_model_._fit_unit(Xh, yh, regressor=yl_at_h)
            self.rho_ = self.diff_model_.rho_
        return self

    def predict(self, X, return_var=False):
        check_is_fitted(self, "rho_")
        U = self._scaler(X)
        if not return_var:
            return self.rho_ * self.low_model_._predict_unit(U) + self.diff_model_._predict_unit(U)
        ml, vl = self.low_model_._predict_unit(U, True)
        md, vd = self.diff_model_._predict_unit(U, True)
        return self.rho_ * ml + md, self.rho_**2 * vl + vd


def _is_affine(x, y, rtol=1e-10) -> bool:
    y = np.asarray(y, dtype=float)
    spread = np.linalg.norm(y - y.mean())
    if spread == 0:
        return True
    A = np.column_stack([np.ones(len(x)), x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    return np.linalg.norm(y - A @ coef) <= rtol * spread


# ---------------------------------------------------------------------------
# Functional interface


@dataclass(frozen=True)
class TrainerConfig:
    n_starts: int = 10
    nugget: float = BASE_NUGGET
    max_nugget: float = MAX_NUGGET
    maxiter: int = 200

    def params(self) -> dict:
        return dict(n_starts=self.n_starts, nugget=self.nugget, max_nugget=self.max_nugget,
                    maxiter=self.maxiter)


def train_kriging(X_h, y_h, config: TrainerConfig | None = None, seed: int = 0,
                  bounds=None) -> KrigingRegressor:
    config = config or TrainerConfig()
    return KrigingRegressor(bounds=bounds, random_state=seed, **config.params()).fit(X_h, y_h)


def train_cokriging(X_h, y_h, X_l, y_l, config: TrainerConfig | None = None, seed: int = 0,
                    bounds=None) -> CoKrigingRegressor:
    config = config or TrainerConfig()
    return CoKrigingRegressor(bounds=bounds, random_state=seed, **config.params()).fit(
        X_h, y_h, X_l, y_l
    )


def predict(model, x):
    """Mean and variance at a single point ``x``."""
    mean, var = model.predict(np.atleast_2d(np.asarray(x, dtype=float)), return_var=True)
    return float(mean[0]), float(var[0])


def pearson_pcorr(y_true, y_pred) -> float:
    """Sample Pearson correlation between true values and model predictions.

    Raises `UndefinedCorrelationError` if either vector has zero variance.
    """
    y = np.asarray(y_true, dtype=float)
    s = np.asarray(y_pred, dtype=float)
    n = len(y)
    if n < 3 or len(s) != n:
        raise ValueError("need at least 3 paired values")
    y_bar, s_bar = y.mean(), s.mean()
    s_y = np.sqrt(np.sum((y - y_bar) ** 2) / (n - 1))
    s_s = np.sqrt(np.sum((s - s_bar) ** 2) / (n - 1))
    if s_y == 0 or s_s == 0:
        raise UndefinedCorrelationError("correlation undefined: constant predictions or targets")
    value = np.sum((y - y_bar) * (s - s_bar)) / (s_y * s_s) / (n - 1)
    return float(np.clip(value, -1.0, 1.0))


@dataclass(frozen=True)
class AccuracyReport:
    p_corr: float
    n_test: int


def accuracy(model, pair: FunctionPair, test_plan=None, seed: int = 0) -> AccuracyReport:
    """P_corr of ``model`` against the pair's high fidelity.

    ``test_plan`` holds domain points; if omitted, a seeded random Latin
    hypercube of ``1000 * d`` points is used.
    """
    if test_plan is None:
        test_plan = test_points(pair.domain, 1000 * pair.d, seed)
    X = pair.domain.check(test_plan)
    y = np.asarray(pair.high(X), dtype=float)
    return AccuracyReport(pearson_pcorr(y, model.predict(X)), len(X))


def test_points(domain: Hypercube, n: int, seed: int) -> np.ndarray:
    """Seeded random-in-cell Latin hypercube in domain coordinates."""
    U = qmc.LatinHypercube(d=domain.d, seed=seed).random(n)
    return domain.from_unit(U)


# Stops pytest from collecting the helper above when it is imported into a test module.
test_points.__test__ = False


# ---------------------------------------------------------------------------
# Text serialisation


def _kriging_block(model: KrigingRegressor, prefix: str) -> list[str]:
    lines = [
        f"{prefix}constant {int(model.constant_)}",
        f"{prefix}length_scales " + " ".join(repr(float(v)) for v in model.length_scales_),
        f"{prefix}trend_mean {model.trend_mean_!r}",
        f"{prefix}process_variance {model.process_variance_!r}",
        f"{prefix}nugget {model.nugget_!r}",
        f"{prefix}n_train {len(model.X_train_)}",
    ]
    for x, y in zip(model.X_train_, model.y_train_):
        lines.append(f"{prefix}row " + " ".join(repr(float(v)) for v in (*x, y)))
    return lines


def dump_model(model, path=None) -> str:
    """Serialise hyperparameters and training data as versioned text.

    Training coordinates are written in the unit-scaled space the model
    works in; the header carries the domain bounds, if any.
    """
    lines = [f"# {MODEL_FORMAT} v{MODEL_VERSION}"]
    bounds = model.bounds
    if bounds is not None:
        b = np.asarray(bounds, dtype=float)
        lines.append("bounds " + " ".join(repr(float(v)) for v in b.ravel()))
    if isinstance(model, CoKrigingRegressor):
        lines.append("kind cokriging")
        lines.append(f"rho {model.rho_!r}")
        lines += _kriging_block(model.low_model_, "low.")
        lines += _kriging_block(model.diff_model_, "diff.")
    else:
        lines.append("kind kriging")
        lines += _kriging_block(model, "")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def _restore_kriging(fields: dict[str, list[str]], rows: list[list[float]], bounds):
    model = KrigingRegressor(bounds=bounds)
    model._scaler = _Scaler(bounds)
    data = np.array(rows, dtype=float)
    d = data.shape[1] - 1
    model.X_train_, model.y_train_ = data[:, :d], data[:, d]
    model.n_features_in_ = d
    model.rho_ = 0.0
    if int(fields["constant"][0]):
        model._set_constant(float(fields["trend_mean"][0]), d)
        return model
    model.constant_ = False
    model.length_scales_ = np.array([float(v) for v in fields["length_scales"]])
    model.trend_mean_ = float(fields["trend_mean"][0])
    model.process_variance_ = float(fields["process_variance"][0])
    model.nugget_ = float(fields["nugget"][0])
    L, _ = _factorize(model.X_train_, model.length_scales_, model.nugget_, model.nugget_)
    if L is None:
        raise DegeneracyError("stored hyperparameters no longer factorize")
    model._L = L
    model._alpha = cho_solve((L, True), model.y_train_ - model.trend_mean_)
    model.log_likelihood_ = np.nan
    model.start_log_likelihoods_ = np.array([])
    return model


def load_model(text_or_path):
    text = str(text_or_path)
    if not text.startswith("#"):
        text = Path(text_or_path).read_text()
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# {MODEL_FORMAT} v{MODEL_VERSION}":
        raise SchemaError("not a supported bifid model file")
    blocks: dict[str, dict] = {"": {}, "low.": {}, "diff.": {}}
    rows: dict[str, list] = {"": [], "low.": [], "diff.": []}
    top: dict[str, list[str]] = {}
    for line in lines[1:]:
        key, *values = line.split()
        prefix = ""
        for p in ("low.", "diff."):
            if key.startswith(p):
                prefix, key = p, key[len(p):]
        if key == "row":
            rows[prefix].append([float(v) for v in values])
        elif key in ("kind", "rho", "bounds"):
            top[key] = values
        else:
            blocks[prefix][key] = values
    bounds = None
    if "bounds" in top:
        bounds = np.array([float(v) for v in top["bounds"]]).reshape(-1, 2)
    if top["kind"][0] == "kriging":
        return _restore_kriging(blocks[""], rows[""], bounds)
    model = CoKrigingRegressor(bounds=bounds)
    model._scaler = _Scaler(bounds)
    model.rho_ = float(top["rho"][0])
    model.low_model_ = _restore_kriging(blocks["low."], rows["low."], None)
    model.diff_model_ = _restore_kriging(blocks["diff."], rows["diff."], None)
    model.n_features_in_ = model.low_model_.n_features_in_
    return model


__all__ = [
    "AccuracyReport",
    "CoKrigingRegressor",
    "KrigingRegressor",
    "TrainerConfig",
    "accuracy",
    "dump_model",
    "load_model",
    "pearson_pcorr",
    "predict",
    "test_points",
    "train_cokriging",
    "train_kriging",
]
