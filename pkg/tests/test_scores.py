import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayescp.posterior import PosteriorDraws
from bayescp.scores import (
    ScoreMatrix,
    aoi_predictive,
    aoi_weights,
    compute_cal_scores,
    compute_test_scores,
    mean_predictive,
    neglog_score,
    score_matrix_from_csv,
    score_matrix_to_csv,
    scores_from_loglik,
)

positive_vectors = st.lists(
    st.floats(min_value=1e-6, max_value=1e6), min_size=1, max_size=40
).map(np.array)


def regression_draws(rows: np.ndarray) -> PosteriorDraws:
    rows = np.atleast_2d(rows)
    d = rows.shape[1] - 3
    names = tuple(f"theta_{j}" for j in range(d)) + ("theta0", "b", "tau")
    return PosteriorDraws(rows, names, "sparse_linear", 0.4)


class TestAoiWeights:
    def test_uniform(self):
        np.testing.assert_allclose(aoi_weights([2.0, 2.0, 2.0, 2.0]), [0.25] * 4)

    def test_direct_ratio(self):
        np.testing.assert_allclose(aoi_weights([1.0, 3.0]), [0.25, 0.75])

    def test_all_zero_rejected(self):
        with pytest.raises(ValueError):
            aoi_weights([0.0, 0.0])

    @settings(max_examples=60, deadline=None)
    @given(f=positive_vectors, c=st.floats(min_value=1e-3, max_value=1e3))
    def test_scale_invariant(self, f, c):
        np.testing.assert_allclose(aoi_weights(c * f), aoi_weights(f), rtol=1e-10)


class TestPredictives:
    def test_aoi_identity(self):
        assert aoi_predictive([1.0, 3.0]) == pytest.approx((1 + 9) / 4)

    def test_aoi_constant(self):
        assert aoi_predictive([0.7] * 9) == pytest.approx(0.7)

    def test_aoi_arithmetic(self):
        assert aoi_predictive([0.2, 0.8]) == pytest.approx(0.68)

    def test_mean(self):
        assert mean_predictive([0.2, 0.8]) == pytest.approx(0.5)
        assert mean_predictive([0.3] * 5) == pytest.approx(0.3)

    def test_mean_empty_rejected(self):
        with pytest.raises(ValueError):
            mean_predictive([])

    @settings(max_examples=80, deadline=None)
    @given(f=positive_vectors)
    def test_cauchy_schwarz_direction(self, f):
        assert aoi_predictive(f) >= mean_predictive(f) - 1e-12 * mean_predictive(f)

    @settings(max_examples=40, deadline=None)
    @given(f=positive_vectors, c=st.floats(min_value=1e-3, max_value=1e3))
    def test_aoi_scale_covariance(self, f, c):
        assert aoi_predictive(c * f) == pytest.approx(c * aoi_predictive(f), rel=1e-9)


class TestNeglogScore:
    def test_unit_density(self):
        assert neglog_score(1.0) == 0.0

    def test_exp_minus_one(self):
        assert neglog_score(math.exp(-1.0)) == pytest.approx(1.0)

    def test_floor(self):
        assert neglog_score(1e-300) == pytest.approx(690.7755, abs=1e-3)
        assert neglog_score(0.0) == pytest.approx(690.7755, abs=1e-3)


class TestBatchScores:
    def test_identical_rows_identical_scores(self):
        rows = np.array([[0.5, 0.1, 1.0, 0.8], [-0.3, 0.0, 1.0, 1.2]])
        draws = regression_draws(rows)
        X = np.tile([[1.0]], (4, 1))
        y = np.full(4, 0.25)
        s = compute_cal_scores(draws, X, y, "aoi_neglog")
        assert np.ptp(s) == 0.0

    def test_single_draw_aoi_equals_mean(self):
        draws = regression_draws(np.array([[0.5, 0.1, 1.0, 0.8]]))
        X = np.array([[1.0], [2.0], [-1.0]])
        y = np.array([0.2, -0.4, 1.0])
        aoi = compute_cal_scores(draws, X, y, "aoi_neglog")
        mean = compute_cal_scores(draws, X, y, "mean_neglog")
        np.testing.assert_array_equal(aoi, mean)

    def test_two_draw_hand_oracle(self):
        # Hand-computed sum f^2 / sum f for two explicit Gaussian draws.
        rows = np.array([[1.0, 0.0, 1.0, 1.0], [0.5, 0.2, 1.0, 2.0]])
        draws = regression_draws(rows)
        x, y = np.array([2.0]), 1.3
        f = []
        for theta, theta0, tau in [(1.0, 0.0, 1.0), (0.5, 0.2, 2.0)]:
            mu = theta * x[0] + theta0
            f.append(math.exp(-0.5 * ((y - mu) / tau) ** 2) / (tau * math.sqrt(2 * math.pi)))
        expected = -math.log(sum(v**2 for v in f) / sum(f))
        got = compute_cal_scores(draws, x[None, :], np.array([y]), "aoi_neglog")[0]
        assert got == pytest.approx(expected, abs=1e-12)

    def test_grid_shape_regression(self):
        rows = np.array([[1.0, 0.0, 1.0, 1.0], [0.8, 0.1, 1.0, 1.1]])
        draws = regression_draws(rows)
        grid = np.linspace(-2, 2, 100)
        sm = compute_test_scores(draws, np.array([[0.5], [1.5]]), grid)
        assert sm.test_scores.shape == (2, 100)

    def test_grid_shape_classification(self):
        draws = PosteriorDraws(np.array([[0.4, -0.1]]), ("w_0", "w0"), "logistic", 0.4)
        sm = compute_test_scores(draws, np.array([[1.0]]), np.array([0.0, 1.0]))
        assert sm.test_scores.shape == (1, 2)

    def test_row_minimum_at_shared_mode(self):
        # All draws share the same mean function, so the predictive is a
        # single Gaussian; the dense-grid minimum must sit at the grid point
        # nearest that mode.
        theta, theta0 = 1.5, -0.2
        rows = np.array([[theta, theta0, 1.0, t] for t in (0.5, 0.8, 1.3)])
        draws = regression_draws(rows)
        X = np.array([[0.7], [-1.1]])
        grid = np.linspace(-4, 4, 401)
        sm = compute_test_scores(draws, X, grid)
        for i in range(len(X)):
            mode = theta * X[i, 0] + theta0
            nearest = int(np.argmin(np.abs(grid - mode)))
            assert int(np.argmin(sm.test_scores[i])) == nearest

    def test_symmetry_shared_routine(self):
        # Calibration scoring and test scoring agree wherever the label sits
        # on the candidate grid: one scoring routine serves both.
        rows = np.array([[1.0, 0.0, 1.0, 1.0], [0.5, 0.2, 1.0, 2.0]])
        draws = regression_draws(rows)
        X = np.array([[0.4], [2.0], [-0.6]])
        grid = np.array([-1.0, 0.0, 1.0])
        sm = compute_test_scores(draws, X, grid)
        for j, y in enumerate(grid):
            cal = compute_cal_scores(draws, X, np.full(3, y))
            np.testing.assert_allclose(cal, sm.test_scores[:, j], atol=1e-12)

    def test_all_scores_finite_under_floor(self):
        rows = np.array([[1.0, 0.0, 1.0, 1e-6]])
        draws = regression_draws(rows)
        s = compute_cal_scores(draws, np.array([[1.0]]), np.array([1e6]))
        assert np.isfinite(s).all()
        assert s[0] == pytest.approx(690.7755, abs=1e-3)

    def test_scores_from_loglik_floor(self):
        ll = np.full((1, 4), -2000.0)
        s = scores_from_loglik(ll, "aoi_neglog")
        assert s[0] == pytest.approx(690.7755, abs=1e-3)


class TestSerialization:
    def test_roundtrip(self, tmp_path):
        sm = ScoreMatrix(
            cal_scores=np.array([0.1, 0.2]),
            test_scores=np.array([[0.3, 0.4], [0.5, 0.6]]),
            score_kind="aoi_neglog",
            candidate_grid=np.array([0.0, 1.0]),
        )
        prefix = tmp_path / "scores"
        score_matrix_to_csv(sm, prefix)
        back = score_matrix_from_csv(prefix)
        np.testing.assert_allclose(back.test_scores, sm.test_scores)
        np.testing.assert_allclose(back.cal_scores, sm.cal_scores)
        assert back.score_kind == "aoi_neglog"
