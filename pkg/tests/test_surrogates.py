import numpy as np
import pytest
from sklearn.base import clone

from bifid.exceptions import DegeneracyError, DesignError, SchemaError, UndefinedCorrelationError
from bifid.sampling import lhs_plan, nested_subset, optimize_plan
from bifid.surrogates import (
    CoKrigingRegressor,
    KrigingRegressor,
    TrainerConfig,
    accuracy,
    dump_model,
    load_model,
    pearson_pcorr,
    predict,
    test_points as draw_test_points,
    train_cokriging,
    train_kriging,
)
from bifid.testbed import get_pair

from oracles import pearson

FAST = TrainerConfig(n_starts=4)


def design(pair, n_h, n_l, seed=0):
    nested = nested_subset(optimize_plan(lhs_plan(n_l, pair.d, seed)), n_h, seed)
    X_l = pair.domain.from_unit(nested.plan.points)
    X_h = pair.domain.from_unit(nested.X_high)
    return X_h, pair.high(X_h), X_l, pair.low(X_l)


@pytest.mark.parametrize("pair_id", ["forrester", "currin", "branin"])
def test_kriging_interpolates(pair_id):
    pair = get_pair(pair_id)
    X_h, y_h, _, _ = design(pair, 8, 8)
    model = train_kriging(X_h, y_h, FAST, seed=1, bounds=pair.domain.bounds)
    err = np.max(np.abs(model.predict(X_h) - y_h))
    assert err <= 1e-6 * np.ptp(y_h)


def test_variance_limits():
    pair = get_pair("forrester")
    X_h, y_h, _, _ = design(pair, 5, 5)
    model = train_kriging(X_h, y_h, FAST, seed=0, bounds=pair.domain.bounds)
    _, var = model.predict(X_h, return_var=True)
    assert np.all(var <= 1e-6 * model.process_variance_)
    # far outside the data (in unscaled coordinates) the variance returns to sigma^2
    raw = KrigingRegressor(n_starts=3).fit(X_h, y_h)
    _, far = raw.predict(np.array([[1e3]]), return_var=True)
    assert far[0] == pytest.approx(raw.process_variance_, rel=1e-9)


def test_predict_single_point():
    pair = get_pair("forrester")
    X_h, y_h, _, _ = design(pair, 4, 4)
    model = train_kriging(X_h, y_h, FAST, bounds=pair.domain.bounds)
    mean, var = predict(model, X_h[0])
    assert mean == pytest.approx(y_h[0], abs=1e-6 * np.ptp(y_h))
    assert var >= 0


def test_constant_data():
    X = np.linspace(0, 1, 5)[:, None]
    model = KrigingRegressor().fit(X, np.full(5, 3.5))
    assert model.constant_
    mean, var = model.predict(np.array([[0.33]]), return_var=True)
    assert mean[0] == 3.5 and var[0] == 0.0


def test_duplicate_points_rejected():
    X = np.array([[0.1], [0.5], [0.1]])
    with pytest.raises(DegeneracyError):
        KrigingRegressor().fit(X, [1.0, 2.0, 3.0])


def test_non_nested_design_rejected():
    X_h = np.array([[0.1], [0.55]])
    X_l = np.array([[0.1], [0.5], [0.9]])
    with pytest.raises(DesignError):
        CoKrigingRegressor().fit(X_h, [1.0, 2.0], X_l, [1.0, 2.0, 3.0])


def test_out_of_domain_prediction():
    pair = get_pair("forrester")
    X_h, y_h, _, _ = design(pair, 4, 4)
    model = train_kriging(X_h, y_h, FAST, bounds=pair.domain.bounds)
    with pytest.raises(Exception):
        model.predict(np.array([[1.5]]))


def test_zero_low_fidelity_reduces_to_kriging():
    pair = get_pair("currin")
    X_h, y_h, X_l, _ = design(pair, 6, 12)
    ck = train_cokriging(X_h, y_h, X_l, np.zeros(len(X_l)), FAST, seed=3, bounds=pair.domain.bounds)
    kr = train_kriging(X_h, y_h, FAST, seed=3, bounds=pair.domain.bounds)
    assert ck.rho_ == 0.0
    U = draw_test_points(pair.domain, 50, 0)
    assert np.allclose(ck.predict(U), kr.predict(U), atol=1e-8, rtol=0)


def test_identical_sources_give_unit_rho():
    pair = get_pair("currin")
    X_h, y_h, X_l, _ = design(pair, 5, 10)
    ck = train_cokriging(X_h, y_h, X_l, pair.high(X_l), FAST, bounds=pair.domain.bounds)
    assert ck.rho_ == pytest.approx(1.0, abs=1e-8)


def test_rho_clipped():
    X_l = np.linspace(0, 1, 8)[:, None]
    X_h = X_l[::2]
    y_l = 1e-3 * np.sin(7 * X_l[:, 0])
    y_h = 100 * np.sin(7 * X_h[:, 0]) + np.cos(3 * X_h[:, 0])
    ck = CoKrigingRegressor(n_starts=3).fit(X_h, y_h, X_l, y_l)
    assert -5.0 <= ck.rho_ <= 5.0


@pytest.mark.parametrize("seed", range(3))
def test_cokriging_interpolates_high(seed):
    pair = get_pair("branin")
    X_h, y_h, X_l, y_l = design(pair, 6, 14, seed)
    ck = train_cokriging(X_h, y_h, X_l, y_l, FAST, seed=seed, bounds=pair.domain.bounds)
    assert np.max(np.abs(ck.predict(X_h) - y_h)) <= 1e-6 * np.ptp(y_h)


def test_affine_output_invariance():
    pair = get_pair("forrester")
    X_h, y_h, _, _ = design(pair, 6, 6)
    a = train_kriging(X_h, y_h, FAST, bounds=pair.domain.bounds)
    b = train_kriging(X_h, 3.0 * y_h - 7.0, FAST, bounds=pair.domain.bounds)
    U = draw_test_points(pair.domain, 40, 1)
    assert np.allclose(b.predict(U), 3.0 * a.predict(U) - 7.0, atol=1e-6 * np.ptp(y_h))
    assert np.allclose(a.length_scales_, b.length_scales_, rtol=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_pearson_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=30)
    s = y * rng.uniform(-1, 1) + rng.normal(size=30)
    assert pearson_pcorr(y, s) == pytest.approx(pearson(list(y), list(s)), abs=1e-12)


def test_pearson_undefined():
    with pytest.raises(UndefinedCorrelationError):
        pearson_pcorr([1.0, 2.0, 3.0], [5.0, 5.0, 5.0])
    with pytest.raises(ValueError):
        pearson_pcorr([1.0, 2.0], [1.0, 2.0])


def test_accuracy_report():
    pair = get_pair("forrester")
    X_h, y_h, X_l, y_l = design(pair, 4, 16)
    ck = train_cokriging(X_h, y_h, X_l, y_l, FAST, bounds=pair.domain.bounds)
    report = accuracy(ck, pair, seed=2)
    assert report.n_test == 1000
    assert report.p_corr > 0.9


@pytest.mark.parametrize("kind", ["kriging", "cokriging"])
def test_dump_load_roundtrip(kind, tmp_path):
    pair = get_pair("currin")
    X_h, y_h, X_l, y_l = design(pair, 5, 10)
    if kind == "kriging":
        model = train_kriging(X_h, y_h, FAST, bounds=pair.domain.bounds)
    else:
        model = train_cokriging(X_h, y_h, X_l, y_l, FAST, bounds=pair.domain.bounds)
    path = tmp_path / "m.txt"
    text = dump_model(model, path)
    back = load_model(path)
    assert dump_model(back) == text
    U = draw_test_points(pair.domain, 30, 0)
    m1, v1 = model.predict(U, return_var=True)
    m2, v2 = back.predict(U, return_var=True)
    assert np.allclose(m1, m2, rtol=1e-10, atol=1e-10 * np.ptp(y_h))
    assert np.allclose(v1, v2, rtol=1e-8, atol=1e-12)


def test_load_rejects_unknown_format():
    with pytest.raises(SchemaError):
        load_model("# bifid-model v7\nkind kriging\n")


def test_sklearn_protocol():
    model = KrigingRegressor(n_starts=3, random_state=5)
    params = model.get_params()
    assert params["n_starts"] == 3 and params["random_state"] == 5
    twin = clone(model)
    assert twin.get_params() == params
    X = np.linspace(0, 1, 6)[:, None]
    y = np.sin(6 * X[:, 0])
    assert not hasattr(twin, "length_scales_")
    twin.fit(X, y)
    assert twin.score(X, y) == pytest.approx(1.0)
    ck = clone(CoKrigingRegressor(random_state=2))
    assert ck.get_params()["random_state"] == 2


def test_determinism():
    pair = get_pair("branin")
    X_h, y_h, X_l, y_l = design(pair, 5, 10)
    a = train_cokriging(X_h, y_h, X_l, y_l, FAST, seed=9, bounds=pair.domain.bounds)
    b = train_cokriging(X_h, y_h, X_l, y_l, FAST, seed=9, bounds=pair.domain.bounds)
    assert dump_model(a) == dump_model(b)


def test_best_start_not_worse_than_starts():
    pair = get_pair("currin")
    X_h, y_h, _, _ = design(pair, 8, 8)
    model = train_kriging(X_h, y_h, TrainerConfig(n_starts=5), bounds=pair.domain.bounds)
    assert len(model.start_log_likelihoods_) == 5
    assert model.log_likelihood_ >= np.max(model.start_log_likelihoods_) - 1e-9


def test_pearson_sign_and_affine_invariance(rng):
    y = rng.normal(size=50)
    s = y + 0.3 * rng.normal(size=50)
    assert pearson_pcorr(y, y) == pytest.approx(1.0, abs=1e-12)
    assert pearson_pcorr(y, -y) == pytest.approx(-1.0, abs=1e-12)
    assert pearson_pcorr(y, 4.5 * s + 11.0) == pytest.approx(pearson_pcorr(y, s), abs=1e-12)
