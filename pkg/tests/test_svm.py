import numpy as np
import pytest

from alpha.errors import DegenerateFit, DimensionError, EmptyDistances
from alpha.svm import (
    ConfidenceThresholds,
    decision_distance,
    fit_linear_svm,
    load_hyperplane,
    predict,
    quartile_thresholds,
    save_hyperplane,
)


def separable_dataset(rng, n=None):
    n = n or int(rng.integers(20, 301))
    u = rng.normal(size=2)
    u /= np.linalg.norm(u)
    offset = rng.uniform(-1, 1)
    gamma = rng.uniform(0.1, 0.4)
    pts, labs = [], []
    while len(pts) < n:
        x = rng.uniform(-3, 3, size=2)
        margin = x @ u - offset
        if abs(margin) < gamma:
            continue
        pts.append(x)
        labs.append(1 if margin > 0 else -1)
    return np.array(pts), np.array(labs)


def grid_oracle(X, y, angles=1440):
    """Dense direction search for the maximum-margin separating line."""
    best = (None, None, -np.inf)
    for theta in np.linspace(0.0, np.pi, angles, endpoint=False):
        u = np.array([np.cos(theta), np.sin(theta)])
        for direction in (u, -u):
            proj = X @ direction
            lo = proj[y == 1].min()
            hi = proj[y == -1].max()
            margin = (lo - hi) / 2
            if margin > best[2]:
                best = (direction, -(lo + hi) / 2, margin)
    return best


def geometric_distance(model, x):
    """Independent route: project onto the plane, measure the gap."""
    z = (np.asarray(x, float) - model.feature_means) / model.feature_scales
    w, b = model.weights, model.bias
    foot = z - ((w @ z + b) / (w @ w)) * w
    return float(np.sign(w @ z + b) * np.linalg.norm(z - foot))


def test_symmetric_two_point_fit():
    model = fit_linear_svm([[0.0, 0.0], [2.0, 0.0]], [-1, +1], c=100.0)
    assert abs(decision_distance(model, [1.0, 0.0])) < 1e-9
    assert predict(model, [1.5, 0.0]) == "malicious"
    d_neg = decision_distance(model, [0.0, 0.0])
    d_pos = decision_distance(model, [2.0, 0.0])
    assert d_pos > 0 > d_neg
    assert abs(d_pos + d_neg) < 1e-9


def test_degenerate_single_class():
    with pytest.raises(DegenerateFit):
        fit_linear_svm([[0, 0], [1, 1]], [1, 1])


def test_dimension_mismatch():
    model = fit_linear_svm([[0.0, 0.0], [2.0, 0.0]], [-1, +1])
    with pytest.raises(DimensionError):
        decision_distance(model, [1.0, 0.0, 3.0])


def test_separable_training_and_oracle_agreement():
    rng = np.random.default_rng(101)
    for _ in range(10):
        X, y = separable_dataset(rng)
        model = fit_linear_svm(X, y, c=100.0)
        d = np.array([decision_distance(model, x) for x in X])
        pred = np.where(d > 0, 1, -1)
        assert (pred == y).all()
        direction, bias, margin = grid_oracle(X, y)
        assert margin > 0
        oracle_pred = np.where(X @ direction + bias > 0, 1, -1)
        assert (pred == oracle_pred).mean() >= 0.99


def test_distance_matches_geometric_projection():
    rng = np.random.default_rng(103)
    X, y = separable_dataset(rng, n=120)
    model = fit_linear_svm(X, y, c=10.0)
    for _ in range(200):
        x = rng.uniform(-5, 5, size=2)
        assert abs(decision_distance(model, x) - geometric_distance(model, x)) <= 1e-6


def test_scale_robustness_of_predictions():
    rng = np.random.default_rng(107)
    X, y = separable_dataset(rng, n=150)
    m1 = fit_linear_svm(X, y, c=10.0)
    X2 = X.copy()
    X2[:, 0] *= 250.0
    m2 = fit_linear_svm(X2, y, c=10.0)
    for x, x2 in zip(X, X2):
        assert predict(m1, x) == predict(m2, x2)


def test_quartile_fixture_positive():
    t = quartile_thresholds([1.0, 2.0, 3.0, 4.0, -1.0])
    assert t.upper_threshold == pytest.approx(1.75, abs=1e-12)


def test_quartile_fixture_constant():
    t = quartile_thresholds([5.0, 5.0, 5.0, 5.0, -2.0])
    assert t.upper_threshold == 5.0


def test_quartile_fixture_negative_mirror():
    t = quartile_thresholds([-1.0, -2.0, -3.0, -4.0, 1.0])
    assert t.lower_threshold == pytest.approx(-1.75, abs=1e-12)


def test_quartile_one_sided_degenerates_to_zero():
    t = quartile_thresholds([1.0, 2.0, 3.0])
    assert t.lower_threshold == 0.0
    t = quartile_thresholds([-1.0, -2.0])
    assert t.upper_threshold == 0.0


def test_quartile_empty_rejected():
    with pytest.raises(EmptyDistances):
        quartile_thresholds([])


def test_thresholds_must_straddle_zero():
    with pytest.raises(ValueError):
        ConfidenceThresholds(upper_threshold=-1.0, lower_threshold=-2.0)


def test_flag_fraction_is_quartile():
    rng = np.random.default_rng(109)
    pos = rng.uniform(0.05, 5.0, size=200)
    neg = -rng.uniform(0.05, 5.0, size=200)
    t = quartile_thresholds(np.concatenate([pos, neg]))
    flagged_pos = np.mean(pos < t.upper_threshold)
    flagged_neg = np.mean(neg > t.lower_threshold)
    assert abs(flagged_pos - 0.25) <= 1.0 / 200 + 1e-12
    assert abs(flagged_neg - 0.25) <= 1.0 / 200 + 1e-12


def test_sign_consistency_ties_benign():
    model = fit_linear_svm([[0.0, 0.0], [2.0, 0.0]], [-1, +1], c=100.0)
    assert predict(model, [1.0, 0.0]) == "benign"


def test_persistence_round_trip(tmp_path):
    rng = np.random.default_rng(113)
    X, y = separable_dataset(rng, n=60)
    model = fit_linear_svm(X, y, c=5.0)
    thresholds = quartile_thresholds([decision_distance(model, x) for x in X])
    path = tmp_path / "layer.json"
    save_hyperplane(model, path, thresholds)
    loaded, loaded_thresholds = load_hyperplane(path)
    assert loaded_thresholds == thresholds
    for x in X[:20]:
        assert decision_distance(loaded, x) == pytest.approx(decision_distance(model, x), abs=1e-12)


def test_constant_feature_gets_unit_scale():
    X = [[0.0, 7.0], [2.0, 7.0], [4.0, 7.0], [6.0, 7.0]]
    model = fit_linear_svm(X, [-1, -1, +1, +1], c=50.0)
    assert model.feature_scales[1] == 1.0
    assert predict(model, [6.0, 7.0]) == "malicious"
    assert predict(model, [0.0, 7.0]) == "benign"
