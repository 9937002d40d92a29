import numpy as np
import pytest
from sklearn.base import clone

from bifid.exceptions import SelectionError, SizeError
from bifid.selector import (
    COKRIGING,
    KRIGING,
    PROJECTION_INPUTS,
    ProjectedSelector,
    ProjectionTransformer,
    cc_baseline_select,
    classify,
    project_2d,
    rule_select,
    rule_select_row,
    train_classifier,
)

from rule_cases import PUBLISHED, TRUTH_TABLE

K, CK = KRIGING, COKRIGING


def test_published_examples():
    assert rule_select(19, 0.5, 0.9, 0.6, 0.5).choice == K
    assert rule_select(19, 0.5, 0.9, 0.6, 0.5).rule_fired == "1a"
    d = rule_select(10, 0.5, 0.9, 0.6, 0.0)
    assert (d.choice, d.rule_fired) == (CK, "2a")
    d = rule_select(4, 0.5, 0.8, 0.2, 0.1)
    assert (d.choice, d.rule_fired) == (CK, "3a")
    d = rule_select(4, 1.0, 0.95, 0.99, 0.9)
    assert (d.choice, d.rule_fired) == (K, "1b")


def test_truth_table_size():
    assert len(TRUTH_TABLE) == 30


@pytest.mark.parametrize("inputs,choice,clause", TRUTH_TABLE)
def test_truth_table(inputs, choice, clause):
    d = rule_select(*inputs)
    assert (d.choice, d.rule_fired) == (choice, clause)
    assert d.inputs == dict(zip(("br_h", "br", "lcc_rd_p0.4", "lcc_rd_p0.95", "diff_r2_l"), inputs))


def test_alternative_threshold():
    assert rule_select(10, 0.5, 0.9, 0.6, 0.0).choice == CK
    d = rule_select(10, 0.5, 0.9, 0.6, 0.0, lcc_095_threshold=0.7)
    assert (d.choice, d.rule_fired) == (K, "3b")


def test_missing_inputs():
    with pytest.raises(SelectionError, match="lcc_rd_p0.95"):
        rule_select(10, 0.5, 0.9, float("nan"), 0.1)
    # rule 1 decides before the missing value is needed
    d = rule_select_row({"br_h": 20.0})
    assert (d.choice, d.inputs) == (K, {"br_h": 20.0})
    with pytest.raises(SelectionError, match="br"):
        rule_select_row({"br_h": 3.0})


def test_cc_baseline():
    assert cc_baseline_select(0.7).choice == CK
    assert cc_baseline_select(0.69).choice == K
    assert cc_baseline_select(1.0).choice == CK
    # a strictly monotone map fixing 0.7 keeps every value on its side of the threshold
    for cc in np.linspace(0, 1, 41):
        warped = 0.7 * (cc / 0.7) ** 3 if cc <= 0.7 else 0.7 + (cc - 0.7) ** 2
        assert cc_baseline_select(min(warped, 1.0)).choice == cc_baseline_select(cc).choice


# -- projection ---------------------------------------------------------------------------


def test_projection_rows():
    assert len(PROJECTION_INPUTS) == 9
    for i, row in enumerate(PUBLISHED):
        e = np.zeros(9)
        e[i] = 1.0
        assert np.allclose(project_2d(e), row, atol=1e-12, rtol=0)
    assert np.allclose(project_2d(np.ones(9)), np.sum(PUBLISHED, axis=0), atol=1e-12)
    assert project_2d(np.zeros(9)).tolist() == [0.0, 0.0]


def test_projection_linear(rng):
    for _ in range(100):
        u, v = rng.normal(size=9), rng.normal(size=9)
        a, b = rng.normal(size=2)
        assert np.allclose(project_2d(a * u + b * v), a * project_2d(u) + b * project_2d(v),
                           atol=1e-12, rtol=0)


def test_projection_errors_and_transformer():
    with pytest.raises(SizeError):
        project_2d(np.ones(8))
    X = np.eye(9)
    tf = ProjectionTransformer()
    assert np.allclose(tf.fit_transform(X), PUBLISHED)
    assert list(tf.get_feature_names_out()) == ["z1", "z2"]


# -- classifier -------------------------------------------------------------------------------


def test_separable_classifier():
    rng = np.random.default_rng(0)
    Z = np.vstack([rng.normal(-3, 0.5, (20, 2)), rng.normal(3, 0.5, (20, 2))])
    y = np.r_[np.ones(20), np.zeros(20)]
    clf = train_classifier(Z, y)
    assert clf.training_accuracy_ == 1.0
    assert classify(clf, [-3, -3]) == K
    assert classify(clf, [3, 3]) == CK


def test_random_labels_near_majority_rate():
    rng = np.random.default_rng(7)
    Z = rng.normal(size=(400, 2))
    y = rng.random(400) < 0.65
    clf = train_classifier(Z, y)
    majority = max(y.mean(), 1 - y.mean())
    assert abs(clf.training_accuracy_ - majority) <= 0.15


def test_classifier_deterministic_and_errors():
    rng = np.random.default_rng(1)
    Z = rng.normal(size=(30, 2))
    y = Z[:, 0] + 0.3 * rng.normal(size=30) > 0
    a, b = train_classifier(Z, y), train_classifier(Z, y)
    assert np.array_equal(a.model_.coef_, b.model_.coef_)
    assert clone(ProjectedSelector(C=0.5)).get_params()["C"] == 0.5
    with pytest.raises(SelectionError):
        train_classifier(Z, np.ones(30))
    with pytest.raises(SelectionError):
        train_classifier(Z[:10], y[:10])
    with pytest.raises(SizeError):
        train_classifier(np.ones((30, 3)), y)
