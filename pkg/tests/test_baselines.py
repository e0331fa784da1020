import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from bayescp.baselines import (
    Interval,
    LassoModel,
    bci_classification_set,
    bci_regression_interval,
    lasso_fit,
    lasso_predict,
    msp_rank,
    split_cp_residual,
)
from bayescp.posterior import PosteriorDraws


def regression_draws(rows):
    rows = np.atleast_2d(rows)
    d = rows.shape[1] - 3
    names = tuple(f"theta_{j}" for j in range(d)) + ("theta0", "b", "tau")
    return PosteriorDraws(rows, names, "sparse_linear", 0.4)


class TestLasso:
    def test_unpenalized_orthonormal_is_ols(self):
        rng = np.random.default_rng(0)
        raw = rng.standard_normal((50, 3))
        Q, _ = np.linalg.qr(raw)
        X = Q * math.sqrt(50)  # columns orthogonal with ||x_j||^2 = n
        beta = np.array([1.0, -2.0, 0.5])
        y = X @ beta
        model = lasso_fit(X, y, penalty=0.0)
        assert np.abs(model.coefficients - beta).max() < 1e-8
        assert model.converged

    def test_soft_threshold_value(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(300)
        x = (x - x.mean()) / x.std()  # population-normalized: x.x/n = 1
        y = x.copy()  # OLS coefficient exactly 1
        model = lasso_fit(x[:, None], y, penalty=0.4)
        assert model.coefficients[0] == pytest.approx(0.6, abs=1e-8)

    def test_full_shrinkage(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((80, 4))
        X -= X.mean(axis=0)
        y = rng.standard_normal(80)
        y -= y.mean()
        penalty = np.abs(X.T @ y).max() / len(y) * 1.0001
        model = lasso_fit(X, y, penalty=penalty)
        np.testing.assert_allclose(model.coefficients, 0.0, atol=1e-12)

    def test_objective_descent_per_sweep(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((60, 5))
        y = X @ np.array([1.0, 0.0, -1.0, 0.5, 0.0]) + rng.normal(0, 0.3, 60)
        model = lasso_fit(X, y, penalty=0.05)
        path = model.objective_path
        assert all(a >= b - 1e-12 for a, b in zip(path, path[1:]))

    def test_non_convergence_flagged(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((30, 3))
        y = rng.standard_normal(30)
        model = lasso_fit(X, y, penalty=0.01, max_iters=1)
        assert not model.converged


class TestSplitCpResidual:
    def test_zero_residuals_zero_width(self):
        X = np.array([[1.0], [2.0], [3.0], [4.0]])
        y = 2.0 * X[:, 0] + 1.0
        exact = LassoModel(np.array([2.0]), 1.0, 0.0, True, 0)
        interval, thr = split_cp_residual(exact, X, y, np.array([2.5]), alpha=0.5)
        assert interval.width == 0.0 and thr.value == 0.0
        fitted = lasso_fit(X, y, penalty=0.0)
        interval, _ = split_cp_residual(fitted, X, y, np.array([2.5]), alpha=0.5)
        assert interval.width < 1e-6

    def test_interval_centred_on_prediction(self):
        rng = np.random.default_rng(5)
        X = rng.standard_normal((40, 2))
        y = X @ np.array([1.0, -1.0]) + rng.normal(0, 0.2, 40)
        model = lasso_fit(X, y, penalty=0.01)
        x_test = np.array([0.3, 0.7])
        interval, _ = split_cp_residual(model, X, y, x_test, alpha=0.2)
        pred = float(lasso_predict(model, x_test)[0])
        assert interval.contains(pred)
        assert interval.upper - pred == pytest.approx(pred - interval.lower)


class TestBciRegression:
    def test_degenerate_noise_collapses(self):
        rows = np.tile([1.0, 0.0, 1.0, 1e-9], (30, 1))
        draws = regression_draws(rows)
        iv = bci_regression_interval(draws, np.array([2.0]), alpha=0.2, m_per_draw=5, seed=0)
        assert iv.width < 1e-6
        assert iv.contains(2.0)

    def test_standard_normal_width(self):
        # Single standard-normal predictive: equal-tailed 80% interval width
        # is 2 * z_{0.9} by the quantile oracle.
        rows = np.array([[0.0, 0.0, 1.0, 1.0]])
        draws = regression_draws(rows)
        iv = bci_regression_interval(draws, np.array([0.0]), alpha=0.2, m_per_draw=200000, seed=1)
        assert iv.width == pytest.approx(2 * norm.ppf(0.9), abs=0.02)

    def test_hpd_no_wider_than_equal_tailed_gaussian(self):
        rows = np.array([[0.0, 0.0, 1.0, 1.0]])
        draws = regression_draws(rows)
        eq = bci_regression_interval(draws, np.array([0.0]), 0.2, m_per_draw=50000, seed=2)
        hp = bci_regression_interval(draws, np.array([0.0]), 0.2, m_per_draw=50000, seed=2, hpd=True)
        assert hp.width <= eq.width + 0.02

    def test_seeded(self):
        rows = np.array([[0.5, 0.1, 1.0, 0.7]])
        draws = regression_draws(rows)
        a = bci_regression_interval(draws, np.array([1.0]), 0.2, 100, seed=3)
        b = bci_regression_interval(draws, np.array([1.0]), 0.2, 100, seed=3)
        assert (a.lower, a.upper) == (b.lower, b.upper)


class TestBciClassification:
    def test_confident_singleton(self):
        assert bci_classification_set(0.95, alpha=0.2) == [1]

    def test_uncertain_keeps_both(self):
        assert bci_classification_set(0.5, alpha=0.2) == [1, 0]

    def test_boundary_singleton(self):
        assert bci_classification_set(0.85, alpha=0.2) == [1]

    def test_label_zero_first_when_dominant(self):
        assert bci_classification_set(0.1, alpha=0.2) == [0]

    @settings(max_examples=100, deadline=None)
    @given(p1=st.floats(0.0, 1.0), alpha=st.floats(0.01, 0.99))
    def test_size_rule(self, p1, alpha):
        labels = bci_classification_set(p1, alpha)
        assert len(labels) in (1, 2)
        assert (len(labels) == 1) == (max(p1, 1 - p1) >= 1 - alpha)


class TestMspRank:
    def test_descending(self):
        assert msp_rank([0.7, 0.3]) == [(0, 0.7), (1, 0.3)]

    def test_tie_by_label_index(self):
        assert [label for label, _ in msp_rank([0.5, 0.5])] == [0, 1]

    def test_singleton(self):
        assert msp_rank([1.0]) == [(0, 1.0)]


class TestInterval:
    def test_contains_endpoints(self):
        iv = Interval(-1.0, 1.0)
        assert iv.contains(-1.0) and iv.contains(1.0) and not iv.contains(1.01)
        assert iv.width == 2.0
