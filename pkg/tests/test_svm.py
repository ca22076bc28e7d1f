import numpy as np
import pytest

from geneteams.svm import (
    GRID,
    SvmError,
    SvmHyperparams,
    decision_value,
    decision_values,
    dual_objective,
    fit_scaling,
    fit_svm,
    grid_search_cv,
    kkt_violation,
    load_model,
    predict,
    rbf_kernel,
    rbf_matrix,
    save_model,
    stratified_folds,
)
from oracles import oracle_bias, qp_dual_oracle


def random_case(rng):
    n = int(rng.integers(2, 7))
    d = int(rng.integers(1, 4))
    X = rng.normal(size=(n, d))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    c = float(10.0 ** rng.integers(-2, 3))
    g = float(10.0 ** rng.integers(-2, 2))
    return X, y, c, g


def test_scaling_examples():
    t = fit_scaling([[0.0, 5.0], [10.0, 5.0]])
    assert t.apply([[5.0, 5.0]]).tolist() == [[0.5, 0.0]]
    assert t.apply([[20.0, 7.0]]).tolist() == [[2.0, 0.0]]


def test_kernel():
    assert rbf_kernel([0, 0], [0, 0], 3.0) == 1.0
    assert rbf_kernel([0, 0], [1, 1], 0.5) == pytest.approx(np.exp(-1.0), abs=1e-15)
    with pytest.raises(SvmError):
        rbf_kernel([0], [0, 1], 1.0)
    K = rbf_matrix(np.eye(3), np.eye(3), 1.0)
    assert np.allclose(K, K.T) and np.allclose(np.diag(K), 1.0)


def test_two_point_symmetric():
    X = np.array([[0.0], [1.0]])
    m = fit_svm(X, [1, -1], SvmHyperparams(10.0, 1.0), scale=False)
    k = np.exp(-1.0)
    # a = 2 / (2 - 2k) for both points; margin passes through the midpoint
    assert np.allclose(m.alpha, 1.0 / (1.0 - k), atol=1e-6)
    assert abs(m.bias) <= 1e-9
    assert decision_value(m, [0.0]) == pytest.approx(1.0, abs=1e-6)
    assert predict(m, [[0.0], [1.0]]).tolist() == [1, -1]


def test_against_qp_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(150):
        X, y, c, g = random_case(rng)
        m = fit_svm(X, y, SvmHyperparams(c, g), scale=False, tol=1e-6)
        K = rbf_matrix(X, X, g)
        best, a_star = qp_dual_oracle(K, y, c)
        assert abs(dual_objective(K, y, m.alpha) - best) <= 1e-4
        assert abs(m.alpha @ y) <= 1e-9
        assert np.all(m.alpha >= 0) and np.all(m.alpha <= c)
        assert kkt_violation(fit_svm(X, y, SvmHyperparams(c, g), scale=False)) <= 1e-3
        b_star = oracle_bias(K, y, a_star, c)
        f_star = K @ (a_star * y) + b_star
        f = decision_values(m, X)
        sure = np.abs(f_star) > 1e-3
        assert np.all(np.sign(f[sure]) == np.sign(f_star[sure]))


def test_free_vectors_on_margin(rng):
    X = rng.normal(size=(30, 3))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=30) > 0, 1.0, -1.0)
    m = fit_svm(X, y, SvmHyperparams(1.0, 0.5))
    free = (m.alpha > 1e-8) & (m.alpha < m.c - 1e-8)
    assert free.any()
    f = decision_values(m, X)
    assert np.all(np.abs(np.abs(f[free]) - 1.0) <= 1e-3)


def test_duplicated_non_support_vector(rng):
    X = np.r_[rng.normal(-1, 0.4, (12, 2)), rng.normal(1, 0.4, (12, 2))]
    y = np.r_[-np.ones(12), np.ones(12)]
    p = SvmHyperparams(10.0, 0.5)
    m = fit_svm(X, y, p, scale=False, tol=1e-8)
    idle = np.flatnonzero(m.alpha == 0.0)
    assert idle.size
    i = idle[0]
    m2 = fit_svm(np.vstack([X, X[i]]), np.r_[y, y[i]], p, scale=False, tol=1e-8)
    grid = rng.normal(size=(200, 2)) * 2
    assert np.allclose(decision_values(m, grid), decision_values(m2, grid), atol=1e-6)
    assert np.array_equal(predict(m, X), predict(m2, X))


def test_overfit_regime_fits_training_set(rng):
    X = rng.normal(size=(40, 5))
    y = np.where(rng.random(40) < 0.5, 1, -1)
    m = fit_svm(X, y, SvmHyperparams(1e4, 1e4))
    assert np.all(predict(m, X) == y)


def test_input_validation():
    with pytest.raises(SvmError):
        fit_svm([[0.0], [1.0]], [1, 1], SvmHyperparams(1, 1))
    with pytest.raises(SvmError):
        fit_svm([[0.0], [np.nan]], [1, -1], SvmHyperparams(1, 1))
    with pytest.raises(SvmError):
        fit_svm([[0.0], [1.0]], [1, 0], SvmHyperparams(1, 1))
    m = fit_svm([[0.0], [1.0]], [1, -1], SvmHyperparams(1, 1))
    with pytest.raises(SvmError):
        decision_values(m, [[0.0, 1.0]])


def test_stratified_folds(rng):
    y = np.r_[np.ones(12), -np.ones(8)]
    folds = stratified_folds(y, 5, rng)
    assert sorted(np.concatenate(folds).tolist()) == list(range(20))
    for f in folds:
        assert len(f) == 4
        assert 1 <= int(np.sum(y[f] > 0)) <= 3
    with pytest.raises(SvmError):
        stratified_folds(np.r_[np.ones(3), -np.ones(10)], 5, rng)


def test_grid_search_separable(rng):
    X = np.r_[rng.normal(-3, 0.5, (20, 2)), rng.normal(3, 0.5, (20, 2))]
    y = np.r_[-np.ones(20), np.ones(20)]
    res = grid_search_cv(X, y, rng=0)
    assert res.cv_accuracy == 1.0
    assert res.best.c in GRID and res.best.gamma in GRID
    assert len(res.table) == 81


def test_grid_search_noise_is_chance():
    rng = np.random.default_rng(5)
    accs = []
    for _ in range(10):
        X = rng.normal(size=(40, 4))
        y = np.where(rng.permutation(40) < 20, 1, -1)
        res = grid_search_cv(X, y, grid_c=(1.0, 100.0), grid_gamma=(0.1, 1.0), rng=rng)
        m = fit_svm(X, y, res.best)
        Xt = rng.normal(size=(200, 4))
        yt = np.where(rng.random(200) < 0.5, 1, -1)
        accs.append(np.mean(predict(m, Xt) == yt))
    assert abs(np.mean(accs) - 0.5) <= 0.15


def test_grid_search_deterministic(rng):
    X = rng.normal(size=(30, 3))
    y = np.where(X[:, 1] > 0, 1, -1)
    a = grid_search_cv(X, y, grid_c=(1, 10), grid_gamma=(0.1, 1), rng=3)
    b = grid_search_cv(X, y, grid_c=(1, 10), grid_gamma=(0.1, 1), rng=3)
    assert a == b


def test_model_round_trip(tmp_path, rng):
    X = rng.normal(size=(25, 4))
    y = np.where(X[:, 0] > 0, 1, -1)
    m = fit_svm(X, y, SvmHyperparams(3.0, 0.7))
    save_model(tmp_path / "m.json", m)
    back = load_model(tmp_path / "m.json")
    Xt = rng.normal(size=(10, 4))
    assert np.array_equal(decision_values(back, Xt), decision_values(m, Xt))
