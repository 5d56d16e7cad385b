import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from repcause.errors import InvalidSpecError, NumericsError
from repcause.learners import (
    LassoSpec,
    fit_lasso,
    fit_logistic,
    fit_logistic_l1,
    fit_mean,
    fit_ols,
    lasso_lambda_max,
    predict,
)
from repcause.learners.linear import _sigmoid, _softplus, _standardize


# --- OLS ----------------------------------------------------------------------


def test_ols_two_point_line():
    m = fit_ols(np.array([[0.0], [1.0]]), np.array([0.0, 2.0]))
    assert abs(m.coef[0] - 2.0) < 1e-12
    assert abs(m.intercept) < 1e-12


def test_ols_constant_target():
    rng = np.random.default_rng(0)
    m = fit_ols(rng.standard_normal((20, 3)), np.full(20, 4.5))
    np.testing.assert_allclose(m.coef, 0.0, atol=1e-10)
    assert abs(m.intercept - 4.5) < 1e-10


def test_ols_matches_normal_equations():
    # independent oracle: solve (A'A) beta = A'y directly
    rng = np.random.default_rng(3)
    x = rng.standard_normal((50, 5))
    y = rng.standard_normal(50)
    a = np.column_stack([np.ones(50), x])
    expected = np.linalg.solve(a.T @ a, a.T @ y)
    m = fit_ols(x, y)
    np.testing.assert_allclose(np.r_[m.intercept, m.coef], expected, atol=1e-8)


def test_ols_residuals_orthogonal():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((80, 4))
    y = rng.standard_normal(80)
    m = fit_ols(x, y)
    resid = y - m.predict(x)
    assert np.max(np.abs(x.T @ resid)) < 1e-6
    assert abs(resid.sum()) < 1e-6


def test_ols_predict_at_mean_is_mean_y():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((30, 3))
    y = rng.standard_normal(30)
    m = fit_ols(x, y)
    at_mean = m.predict(x.mean(axis=0, keepdims=True))[0]
    assert abs(at_mean - y.mean()) < 1e-10


def test_ols_rank_deficiency_falls_back():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((20, 2))
    x = np.column_stack([x, x[:, 0]])  # duplicated column
    y = rng.standard_normal(20)
    m = fit_ols(x, y)  # must not raise
    assert np.all(np.isfinite(m.coef))


def test_ols_rejects_non_finite():
    with pytest.raises(NumericsError):
        fit_ols(np.array([[1.0], [np.nan]]), np.array([0.0, 1.0]))


# --- lasso ----------------------------------------------------------------------


def test_lasso_null_solution_at_lambda_max():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((60, 6))
    y = rng.standard_normal(60)
    lam_max = lasso_lambda_max(x, y)
    m = fit_lasso(x, y, lam=lam_max * 1.0001)
    np.testing.assert_array_equal(m.coef, 0.0)
    assert abs(m.intercept - y.mean()) < 1e-12


def _mean_zero_orthonormal_design(n, d, seed):
    # columns exactly mean-zero with X'X = n I: Gram-Schmidt over the
    # complement of the constant vector, scaled by sqrt(n)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, d))
    g -= g.mean(axis=0)
    q, _ = np.linalg.qr(g)
    return q * np.sqrt(n)


def test_lasso_orthonormal_soft_threshold_oracle():
    n, d = 200, 8
    x = _mean_zero_orthonormal_design(n, d, 11)
    rng = np.random.default_rng(12)
    y = x[:, 0] * 0.5 - 0.3 * x[:, 2] + rng.standard_normal(n)
    lam = 0.12
    rho = x.T @ (y - y.mean()) / n
    expected = np.sign(rho) * np.maximum(np.abs(rho) - lam, 0.0)
    m = fit_lasso(x, y, lam=lam)
    np.testing.assert_allclose(m.coef, expected, atol=1e-6)


def test_lasso_zero_penalty_matches_ols():
    rng = np.random.default_rng(13)
    x = rng.standard_normal((80, 5))
    y = x @ np.array([1.0, -0.5, 0.0, 2.0, 0.25]) + 0.2 * rng.standard_normal(80)
    ols = fit_ols(x, y)
    lasso = fit_lasso(x, y, lam=0.0)
    np.testing.assert_allclose(lasso.coef, ols.coef, atol=1e-6)
    np.testing.assert_allclose(lasso.intercept, ols.intercept, atol=1e-6)


def test_lasso_kkt_conditions():
    rng = np.random.default_rng(14)
    x = rng.standard_normal((120, 10))
    y = x[:, 0] - 2.0 * x[:, 3] + 0.5 * rng.standard_normal(120)
    lam = 0.1
    m = fit_lasso(x, y, lam=lam)
    xs, _, _, _ = _standardize(x)
    yc = y - y.mean()
    resid = yc - xs @ m.beta_standardized
    grad = xs.T @ resid / len(y)
    active = np.abs(m.beta_standardized) > 0
    assert np.all(np.abs(grad[~active]) <= lam + 1e-6)
    np.testing.assert_allclose(np.abs(grad[active]), lam, atol=1e-6)


def test_lasso_cv_selects_and_is_deterministic():
    rng = np.random.default_rng(15)
    x = rng.standard_normal((100, 8))
    y = 2.0 * x[:, 1] + 0.1 * rng.standard_normal(100)
    a = fit_lasso(x, y, seed=3)
    b = fit_lasso(x, y, seed=3)
    np.testing.assert_array_equal(a.coef, b.coef)
    assert a.lam == b.lam
    assert abs(a.coef[1] - 2.0) < 0.1


def test_lasso_empty_grid_rejected():
    with pytest.raises(InvalidSpecError):
        LassoSpec(cv_grid=())
    rng = np.random.default_rng(16)
    with pytest.raises(InvalidSpecError):
        fit_lasso(rng.standard_normal((10, 2)), rng.standard_normal(10), cv_grid=[])


# --- logistic (IRLS, L2) ---------------------------------------------------------


def _penalized_logistic_loss(x, t, intercept, slope, lam):
    eta = intercept + x[:, 0] * slope
    return float(np.sum(_softplus(eta) - t * eta)
                 + 0.5 * lam * (intercept**2 + slope**2))


def test_logistic_one_class_shrinks_to_half():
    x = np.linspace(-1, 1, 20).reshape(-1, 1)
    t = np.ones(20)
    m_small = fit_logistic(x, t, l2_lambda=0.5)
    p_small = m_small.predict(x)
    assert np.all(p_small > 0.5) and np.all(p_small < 1.0)
    m_big = fit_logistic(x, t, l2_lambda=1e6)
    assert np.max(np.abs(m_big.coef)) < 1e-4  # slopes -> 0
    assert np.max(np.abs(m_big.predict(x) - 0.5)) < 1e-3


def test_logistic_1d_grid_search_oracle():
    x = np.array([[-1.0], [1.0]])
    t = np.array([0.0, 1.0])
    m = fit_logistic(x, t, l2_lambda=1.0)
    # brute force over (intercept, slope)
    grid = np.linspace(-3, 3, 1201)
    best = min(
        ((b0, b1) for b0 in grid for b1 in grid),
        key=lambda p: _penalized_logistic_loss(x, t, p[0], p[1], 1.0),
    )
    assert abs(m.intercept - best[0]) < 1e-2  # grid resolution 5e-3
    assert abs(m.coef[0] - best[1]) < 1e-2
    # and the fitted loss is no worse than the grid optimum
    fitted = _penalized_logistic_loss(x, t, m.intercept, m.coef[0], 1.0)
    oracle = _penalized_logistic_loss(x, t, best[0], best[1], 1.0)
    assert fitted <= oracle + 1e-4


def test_logistic_prediction_invariance_at_zero_penalty():
    rng = np.random.default_rng(17)
    n, d = 300, 4
    z = rng.standard_normal((n, d))
    t = (rng.random(n) < _sigmoid(z[:, 0] - 0.5 * z[:, 2])).astype(float)
    base = fit_logistic(z, t, l2_lambda=0.0)
    assert base.diagnostics.converged
    q = rng.standard_normal((d, d))  # generic invertible map
    rotated = fit_logistic(z @ q.T, t, l2_lambda=0.0)
    assert rotated.diagnostics.converged
    np.testing.assert_allclose(rotated.predict(z @ q.T), base.predict(z),
                               atol=1e-5)


def test_logistic_separation_guard():
    x = np.array([[-2.0], [-1.0], [1.0], [2.0]])
    t = np.array([0.0, 0.0, 1.0, 1.0])
    m = fit_logistic(x, t, l2_lambda=0.0)
    assert not m.diagnostics.converged  # perfectly separable


# --- logistic (L1, proximal gradient) ---------------------------------------------


def test_logistic_l1_large_penalty_gives_base_rate():
    rng = np.random.default_rng(18)
    x = rng.standard_normal((100, 5))
    t = (rng.random(100) < 0.3).astype(float)
    m = fit_logistic_l1(x, t, lam=10.0)
    np.testing.assert_array_equal(m.coef, 0.0)
    expected = np.log(t.mean() / (1 - t.mean()))
    assert abs(m.intercept - expected) < 1e-4


def test_logistic_l1_zero_penalty_matches_irls():
    rng = np.random.default_rng(19)
    x = rng.standard_normal((200, 3))
    t = (rng.random(200) < _sigmoid(0.8 * x[:, 0])).astype(float)
    prox = fit_logistic_l1(x, t, lam=0.0)
    irls = fit_logistic(x, t, l2_lambda=0.0)
    np.testing.assert_allclose(prox.predict(x), irls.predict(x), atol=1e-4)


def test_logistic_l1_sign_recovery():
    rng = np.random.default_rng(20)
    x = rng.standard_normal((400, 2))
    t = (rng.random(400) < _sigmoid(1.5 * x[:, 0])).astype(float)
    m = fit_logistic_l1(x, t, seed=2)
    assert m.coef[0] > 0
    assert abs(m.coef[0]) > 5 * abs(m.coef[1])


# --- shared prediction contracts --------------------------------------------------


def test_mean_learner():
    rng = np.random.default_rng(21)
    x = rng.standard_normal((10, 2))
    y = rng.standard_normal(10)
    m = fit_mean(x, y)
    np.testing.assert_allclose(m.predict(x), y.mean())
    fixed = fit_mean(x, y, spec=None)
    assert fixed.predict(x).shape == (10,)


def test_predict_is_pure_and_bounded():
    rng = np.random.default_rng(22)
    x = rng.standard_normal((50, 3))
    t = rng.integers(0, 2, 50).astype(float)
    m = fit_logistic(x, t, l2_lambda=0.1)
    p1, p2 = predict(m, x), predict(m, x)
    np.testing.assert_array_equal(p1, p2)
    assert np.all((p1 >= 0) & (p1 <= 1))


@given(seed=st.integers(0, 2_000))
@settings(max_examples=30, deadline=None)
def test_classifier_probabilities_property(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(10, 60))
    d = int(rng.integers(1, 5))
    x = rng.standard_normal((n, d))
    t = rng.integers(0, 2, n).astype(float)
    if t.min() == t.max():
        t[0] = 1.0 - t[0]
    m = fit_logistic(x, t, l2_lambda=0.5)
    p = m.predict(x)
    assert np.all((p >= 0.0) & (p <= 1.0))
