"""Learner cores checked against independent oracles."""

import json

import numpy as np
import pytest

from causalselect import ConfigurationError, DegenerateDataError, NumericalError
from causalselect.learners import (
    GbtModel,
    PlattMap,
    gbt_fit,
    logistic_fit,
    model_from_dict,
    model_to_dict,
    platt_calibrate,
    ridge_fit,
    sigmoid,
    stack_fit,
)

# ---------------------------------------------------------------------------
# ridge
# ---------------------------------------------------------------------------


def test_ridge_exact_interpolation():
    model = ridge_fit(np.array([[1.0], [2.0]]), np.array([1.0, 2.0]), lam=0.0)
    assert model.weights[0] == pytest.approx(1.0, abs=1e-12)
    assert model.intercept == pytest.approx(0.0, abs=1e-12)


def test_ridge_infinite_shrinkage_limit():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((30, 2))
    y = rng.standard_normal(30)
    model = ridge_fit(x, y, lam=1e12)
    assert np.linalg.norm(model.weights) < 1e-6
    assert model.intercept == pytest.approx(float(np.mean(y)), abs=1e-6)


def _normal_equation_oracle(x, y, lam):
    # independent formulation: augmented design, penalty matrix on weights only
    n, p = x.shape
    design = np.hstack([x, np.ones((n, 1))])
    penalty = np.diag([lam] * p + [0.0])
    theta = np.linalg.solve(design.T @ design + penalty, design.T @ y)
    return theta[:p], theta[p]


@pytest.mark.parametrize("lam", [1e-3, 0.1, 1.0, 25.0])
def test_ridge_matches_normal_equation_oracle(lam):
    rng = np.random.default_rng(42)
    x = rng.standard_normal((20, 3))
    y = x @ np.array([1.0, -2.0, 0.5]) + rng.standard_normal(20)
    model = ridge_fit(x, y, lam=lam)
    w, b = _normal_equation_oracle(x, y, lam)
    assert np.max(np.abs(model.weights - w)) < 1e-8
    assert abs(model.intercept - b) < 1e-8


def test_ridge_rank_deficient_at_zero_penalty():
    x = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0]])  # duplicated direction
    with pytest.raises(NumericalError):
        ridge_fit(x, np.array([1.0, 2.0, 3.0]), lam=0.0)


def test_ridge_rejects_negative_penalty():
    with pytest.raises(ConfigurationError):
        ridge_fit(np.ones((2, 1)), np.ones(2), lam=-1.0)


# ---------------------------------------------------------------------------
# logistic
# ---------------------------------------------------------------------------


def test_logistic_intercept_only_recovers_base_rate():
    rng = np.random.default_rng(1)
    a = (rng.random(2000) < 0.3).astype(float)
    model = logistic_fit(np.zeros((2000, 0)), a, l2=0.0)
    assert model.predict_proba(np.zeros((5, 0))) == pytest.approx(np.mean(a), abs=1e-8)


def test_logistic_strong_penalty_shrinks_weights():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((500, 3))
    a = (rng.random(500) < 0.5).astype(float)  # labels independent of x
    model = logistic_fit(x, a, l2=1e8)
    assert np.linalg.norm(model.weights) < 1e-5


def _grid_search_loss(x, a, l2):
    # three-stage refinement keeps the final bracket within ~1e-6 of the optimum
    from causalselect.learners import _logistic_loss

    lo_w, hi_w, lo_b, hi_b = -4.0, 4.0, -4.0, 4.0
    best = (np.inf, 0.0, 0.0)
    for _ in range(3):
        ws = np.linspace(lo_w, hi_w, 120)
        bs = np.linspace(lo_b, hi_b, 120)
        for w in ws:
            z = x[:, 0] * w
            for b in bs:
                loss = _logistic_loss(z + b, a, np.array([w]), l2)
                if loss < best[0]:
                    best = (loss, w, b)
        _, w0, b0 = best
        span_w, span_b = (hi_w - lo_w) / 20, (hi_b - lo_b) / 20
        lo_w, hi_w = w0 - span_w, w0 + span_w
        lo_b, hi_b = b0 - span_b, b0 + span_b
    return best[0]


def test_logistic_matches_grid_search_oracle():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((150, 1))
    a = (rng.random(150) < sigmoid(1.5 * x[:, 0] - 0.4)).astype(float)
    model = logistic_fit(x, a, l2=1.0)
    from causalselect.learners import _logistic_loss

    fitted_loss = _logistic_loss(
        model.decision(x), a, model.weights, model.l2
    )
    oracle_loss = _grid_search_loss(x, a, 1.0)
    assert abs(fitted_loss - oracle_loss) < 1e-6


def test_logistic_loss_non_increasing_and_converges():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((400, 2))
    a = (rng.random(400) < sigmoid(x @ np.array([2.0, -1.0]))).astype(float)
    model = logistic_fit(x, a, l2=0.5)
    assert model.converged
    diffs = np.diff(model.loss_path)
    assert np.all(diffs <= 1e-12)


def test_logistic_single_class_rejected():
    with pytest.raises(DegenerateDataError):
        logistic_fit(np.ones((10, 1)), np.ones(10), l2=1.0)


def test_logistic_non_binary_rejected():
    with pytest.raises(ConfigurationError):
        logistic_fit(np.ones((3, 1)), np.array([0.0, 1.0, 2.0]), l2=1.0)


# ---------------------------------------------------------------------------
# gradient boosting
# ---------------------------------------------------------------------------


def test_gbt_zero_rounds_predicts_mean():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((50, 2))
    y = rng.standard_normal(50)
    model = gbt_fit(x, y, n_rounds=0)
    assert model.trees == []
    assert np.allclose(model.predict(x), np.mean(y))


def test_gbt_zero_learning_rate_equals_zero_rounds():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((50, 2))
    y = rng.standard_normal(50)
    frozen = gbt_fit(x, y, learning_rate=0.0, n_rounds=10)
    empty = gbt_fit(x, y, n_rounds=0)
    assert frozen.trees == []
    assert np.array_equal(frozen.predict(x), empty.predict(x))


def _exhaustive_depth1_oracle(x, g):
    # brute force over every feature and every midpoint between sorted values
    best = (np.inf, None, None)
    for f in range(x.shape[1]):
        vs = np.unique(x[:, f])
        for lo, hi in zip(vs[:-1], vs[1:]):
            thr = (lo + hi) / 2.0
            left = g[x[:, f] <= thr]
            right = g[x[:, f] > thr]
            sse = np.sum((left - left.mean()) ** 2) + np.sum((right - right.mean()) ** 2)
            if sse < best[0]:
                best = (sse, f, thr)
    return best[1], best[2]


def test_gbt_first_split_matches_exhaustive_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = rng.standard_normal((6, 2))
        y = rng.standard_normal(6)
        model = gbt_fit(x, y, learning_rate=1.0, max_leaf_nodes=2, n_rounds=1)
        tree = model.trees[0]
        f_oracle, thr_oracle = _exhaustive_depth1_oracle(x, y - y.mean())
        assert tree.feature[0] == f_oracle
        assert tree.threshold[0] == pytest.approx(thr_oracle, abs=1e-12)


def test_gbt_training_mse_non_increasing_in_rounds():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((150, 2))
    y = np.sin(x[:, 0]) + 0.5 * x[:, 1] ** 2
    model = gbt_fit(x, y, learning_rate=0.3, max_leaf_nodes=6, n_rounds=20)
    pred = np.full(len(y), model.base_score)
    last = np.inf
    for tree in model.trees:
        pred = pred + model.learning_rate * tree.predict(x)
        mse = float(np.mean((y - pred) ** 2))
        assert mse <= last + 1e-12
        last = mse


def test_gbt_constant_binary_target_returns_base_only():
    x = np.arange(10, dtype=float)[:, None]
    model = gbt_fit(x, np.ones(10), loss="logistic", n_rounds=5)
    assert model.trees == []
    assert np.all(model.predict_proba(x) > 0.999)


def test_gbt_respects_max_leaf_nodes():
    rng = np.random.default_rng(9)
    x = rng.standard_normal((300, 2))
    y = rng.standard_normal(300)
    model = gbt_fit(x, y, max_leaf_nodes=5, n_rounds=4)
    assert all(t.n_leaves <= 5 for t in model.trees)


def test_gbt_logistic_learns_separation():
    rng = np.random.default_rng(10)
    x = rng.standard_normal((400, 2))
    a = (x[:, 0] > 0.2).astype(float)
    model = gbt_fit(x, a, loss="logistic", learning_rate=0.5, max_leaf_nodes=4, n_rounds=25)
    acc = np.mean((model.predict_proba(x) > 0.5) == a)
    assert acc > 0.97


# ---------------------------------------------------------------------------
# stacking
# ---------------------------------------------------------------------------


def _ridge_fitter(lam):
    return lambda xs, ts: ridge_fit(xs, ts, lam=lam)


def test_stack_single_base_is_identity():
    rng = np.random.default_rng(11)
    x = rng.standard_normal((40, 2))
    y = rng.standard_normal(40)
    stack = stack_fit([_ridge_fitter(1.0)], x, y, oof_folds=4)
    assert np.array_equal(stack.meta_weights, np.array([1.0]))
    assert np.allclose(stack.predict(x), ridge_fit(x, y, 1.0).predict(x))


def test_stack_identical_bases_degenerate():
    rng = np.random.default_rng(12)
    x = rng.standard_normal((40, 2))
    y = rng.standard_normal(40)
    stack = stack_fit([_ridge_fitter(2.0), _ridge_fitter(2.0)], x, y, oof_folds=4)
    assert stack.meta_weights.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(stack.predict(x), ridge_fit(x, y, 2.0).predict(x), atol=1e-9)


def test_stack_prefers_perfect_base():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((100, 2))
    y = x @ np.array([1.0, -1.5])  # noise free
    stack = stack_fit([_ridge_fitter(1e-10), _ridge_fitter(1e12)], x, y, oof_folds=5)
    assert stack.meta_weights[0] >= 0.99


def test_stack_oof_loss_never_worse_than_worst_base():
    rng = np.random.default_rng(14)
    x = rng.standard_normal((60, 2))
    y = x[:, 0] + rng.standard_normal(60)
    fitters = [_ridge_fitter(0.1), _ridge_fitter(100.0)]
    stack = stack_fit(fitters, x, y, oof_folds=5)
    # rebuild the same out-of-fold predictions to score each side
    from causalselect.learners import _fold_slices

    oof = np.zeros((60, 2))
    for fold in _fold_slices(60, 5):
        mask = np.ones(60, dtype=bool)
        mask[fold] = False
        for j, fitter in enumerate(fitters):
            oof[fold, j] = fitter(x[mask], y[mask]).predict(x[fold])
    stack_loss = np.mean((y - oof @ stack.meta_weights) ** 2)
    base_losses = [np.mean((y - oof[:, j]) ** 2) for j in range(2)]
    assert stack_loss <= max(base_losses) + 1e-9


def test_stack_needs_enough_rows():
    with pytest.raises(ConfigurationError):
        stack_fit([_ridge_fitter(1.0)], np.ones((3, 1)), np.ones(3), oof_folds=5)


def test_stack_classification_brier_weights():
    rng = np.random.default_rng(15)
    x = rng.standard_normal((200, 2))
    a = (rng.random(200) < sigmoid(2.0 * x[:, 0])).astype(float)
    fitters = [
        lambda xs, ts: logistic_fit(xs, ts, l2=1.0),
        lambda xs, ts: gbt_fit(xs, ts, loss="logistic", n_rounds=5, max_leaf_nodes=3),
    ]
    stack = stack_fit(fitters, x, a, task="classification", oof_folds=5)
    proba = stack.predict_proba(x)
    assert np.all(proba >= 0.0) and np.all(proba <= 1.0)
    assert stack.meta_weights.sum() == pytest.approx(1.0, abs=1e-9)


# ---------------------------------------------------------------------------
# Platt calibration
# ---------------------------------------------------------------------------


def test_platt_constant_when_scores_uninformative():
    rng = np.random.default_rng(16)
    labels = (rng.random(4000) < 0.3).astype(float)
    scores = np.full(4000, 0.3)  # scores carry no information beyond the rate
    platt = platt_calibrate(scores, labels)
    out = platt(np.array([-1.0, 0.3, 2.0]))
    assert np.max(np.abs(out - labels.mean())) < 0.05


def test_platt_preserves_score_ordering():
    rng = np.random.default_rng(17)
    scores = rng.standard_normal(3000)
    labels = (rng.random(3000) < sigmoid(1.2 * scores)).astype(float)
    platt = platt_calibrate(scores, labels)
    grid = np.linspace(-3, 3, 100)
    out = platt(grid)
    assert np.all(np.diff(out) > 0)


def test_platt_recovers_generating_slope():
    rng = np.random.default_rng(18)
    scores = rng.standard_normal(10000)
    labels = (rng.random(10000) < sigmoid(2.0 * scores - 1.0)).astype(float)
    platt = platt_calibrate(scores, labels)
    assert abs(platt.slope - 2.0) <= 0.3  # within 15%
    assert platt(np.array([0.0]))[0] == pytest.approx(sigmoid(np.array([-1.0]))[0], abs=0.05)


def test_platt_single_class_rejected():
    with pytest.raises(DegenerateDataError):
        platt_calibrate(np.arange(5.0), np.zeros(5))


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def test_models_round_trip_through_json():
    rng = np.random.default_rng(19)
    x = rng.standard_normal((80, 2))
    y = x[:, 0] + 0.1 * rng.standard_normal(80)
    a = (rng.random(80) < 0.5).astype(float)
    models = [
        ridge_fit(x, y, 0.5),
        logistic_fit(x, a, l2=1.0),
        gbt_fit(x, y, n_rounds=3, max_leaf_nodes=4),
        stack_fit([_ridge_fitter(0.1), _ridge_fitter(10.0)], x, y, oof_folds=4),
        PlattMap(slope=1.2, intercept=-0.3),
    ]
    probe = rng.standard_normal((10, 2))
    for model in models:
        payload = json.loads(json.dumps(model_to_dict(model)))
        clone = model_from_dict(payload)
        if isinstance(model, PlattMap):
            assert np.allclose(model(probe[:, 0]), clone(probe[:, 0]))
        elif isinstance(model, GbtModel) or hasattr(model, "predict"):
            assert np.array_equal(model.predict(probe), clone.predict(probe))
