import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayescp.datasets import (
    Dataset,
    apply_standardizer,
    fit_standardizer,
    label_grid,
    load_csv,
    make_split,
    split_from_json,
    split_to_json,
    standardizer_from_json,
    standardizer_to_json,
    synthetic_regression,
)


class TestLoadCsv:
    def test_diabetes_dimensions(self, diabetes):
        assert diabetes.n == 442
        assert diabetes.d == 10
        assert diabetes.task_kind == "regression"

    def test_breast_cancer_dimensions(self, breast_cancer):
        assert breast_cancer.n == 569
        assert breast_cancer.d == 30
        assert set(np.unique(breast_cancer.labels)) <= {0.0, 1.0}

    def test_non_numeric_cell_rejected(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,y\n1,2,3\n4,oops,6\n7,8,9\n")
        with pytest.raises(ValueError, match="oops"):
            load_csv(p, "regression")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="nope.csv"):
            load_csv(tmp_path / "nope.csv", "regression")

    def test_classification_label_outside_01(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,y\n1,0\n2,1\n3,2\n")
        with pytest.raises(ValueError, match="outside"):
            load_csv(p, "classification")


class TestMakeSplit:
    def test_diabetes_sizes(self):
        split = make_split(442, (0.525, 0.175, 0.30), seed=0)
        assert (len(split.train_idx), len(split.cal_idx), len(split.test_idx)) == (232, 77, 133)

    def test_exact_ratio_sizes(self):
        split = make_split(10, (0.5, 0.2, 0.3), seed=7)
        assert (len(split.train_idx), len(split.cal_idx), len(split.test_idx)) == (5, 2, 3)

    def test_deterministic(self):
        a = make_split(100, (0.5, 0.25, 0.25), seed=42)
        b = make_split(100, (0.5, 0.25, 0.25), seed=42)
        assert np.array_equal(a.train_idx, b.train_idx)
        assert np.array_equal(a.cal_idx, b.cal_idx)
        assert np.array_equal(a.test_idx, b.test_idx)

    def test_too_small(self):
        with pytest.raises(ValueError):
            make_split(3, (0.5, 0.2, 0.3), seed=0)  # cal part would be empty

    @settings(max_examples=60, deadline=None)
    @given(
        n=st.integers(min_value=10, max_value=400),
        seed=st.integers(min_value=0, max_value=2**31),
        w=st.tuples(
            st.floats(0.2, 0.6), st.floats(0.1, 0.4), st.floats(0.1, 0.4)
        ),
    )
    def test_partition_property(self, n, seed, w):
        total = sum(w)
        ratios = tuple(x / total for x in w)
        split = make_split(n, ratios, seed)
        merged = np.concatenate([split.train_idx, split.cal_idx, split.test_idx])
        assert len(merged) == n
        assert np.array_equal(np.sort(merged), np.arange(n))

    def test_json_roundtrip(self):
        split = make_split(50, (0.5, 0.25, 0.25), seed=3)
        back = split_from_json(split_to_json(split))
        assert np.array_equal(back.test_idx, split.test_idx)
        assert back.seed == split.seed


class TestStandardizer:
    def _toy(self, X, y=None, kind="regression"):
        X = np.asarray(X, dtype=float)
        if y is None:
            y = np.arange(len(X), dtype=float)
        names = tuple(f"c{j}" for j in range(X.shape[1]))
        return Dataset(X, np.asarray(y, dtype=float), names, kind)

    def test_two_point_column(self):
        data = self._toy([[1.0], [3.0], [2.0]])
        std = fit_standardizer(data, np.array([0, 1]))
        out = apply_standardizer(std, data)
        np.testing.assert_allclose(out.features[:2, 0], [-0.70710678, 0.70710678])

    def test_constant_column_named(self):
        data = self._toy([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])
        with pytest.raises(ValueError, match="c0"):
            fit_standardizer(data, np.array([0, 1, 2]))

    def test_row_at_training_mean_maps_to_zero(self):
        data = self._toy([[1.0], [3.0], [2.0]])
        std = fit_standardizer(data, np.array([0, 1]))
        out = apply_standardizer(std, data)
        assert abs(out.features[2, 0]) < 1e-12  # row equals the training mean

    def test_train_columns_zero_mean_unit_sd(self):
        rng = np.random.default_rng(0)
        data = self._toy(rng.normal(3.0, 2.5, size=(60, 4)), rng.normal(size=60))
        train = np.arange(40)
        out = apply_standardizer(fit_standardizer(data, train), data)
        cols = out.features[train]
        assert np.abs(cols.mean(axis=0)).max() < 1e-10
        assert np.abs(cols.std(axis=0, ddof=1) - 1.0).max() < 1e-10
        ytr = out.labels[train]
        assert abs(ytr.mean()) < 1e-10 and abs(ytr.std(ddof=1) - 1.0) < 1e-10

    def test_leakage_free(self):
        rng = np.random.default_rng(1)
        data = self._toy(rng.normal(size=(30, 2)), rng.normal(size=30))
        split = make_split(30, (0.5, 0.25, 0.25), seed=5)
        std = fit_standardizer(data, split.train_idx)
        cal_means = data.features[split.cal_idx].mean(axis=0)
        assert not np.allclose(cal_means, std.feature_means)

    def test_json_roundtrip(self):
        data = self._toy([[1.0], [3.0], [2.0]])
        std = fit_standardizer(data, np.array([0, 1]))
        back = standardizer_from_json(standardizer_to_json(std))
        np.testing.assert_allclose(back.feature_means, std.feature_means)
        assert back.label_sd == std.label_sd


class TestLabelGrid:
    def test_hundred_points(self):
        grid = label_grid(np.array([0.0, 10.0, 4.0]), 100)
        assert len(grid) == 100
        assert grid[0] == 0.0 and grid[-1] == 10.0
        np.testing.assert_allclose(np.diff(grid), 10.0 / 99)

    def test_three_points(self):
        np.testing.assert_allclose(label_grid(np.array([-1.0, 1.0]), 3), [-1.0, 0.0, 1.0])

    def test_size_one_rejected(self):
        with pytest.raises(ValueError):
            label_grid(np.array([0.0, 1.0]), 1)

    def test_degenerate_labels_rejected(self):
        with pytest.raises(ValueError):
            label_grid(np.array([2.0, 2.0]), 10)

    @settings(max_examples=40, deadline=None)
    @given(
        lo=st.floats(-100, 100),
        span=st.floats(1e-3, 1e3),
        k=st.integers(min_value=2, max_value=500),
    )
    def test_constant_spacing(self, lo, span, k):
        grid = label_grid(np.array([lo, lo + span]), k)
        gaps = np.diff(grid)
        assert gaps.max() - gaps.min() < 1e-12 * max(1.0, span)
        assert np.all(gaps > 0)


class TestSyntheticRegression:
    def test_near_noiseless(self):
        theta = np.array([1.0, -2.0, 0.5])
        data = synthetic_regression(50, 3, theta, noise_sd=1e-8, seed=0)
        resid = data.labels - data.features @ theta
        assert np.abs(resid).max() < 1e-6

    def test_ols_recovery(self):
        # Closed-form least-squares oracle on a large sample.
        theta = np.array([1.0, 0.0])
        data = synthetic_regression(10000, 2, theta, noise_sd=1.0, seed=1)
        ols, *_ = np.linalg.lstsq(data.features, data.labels, rcond=None)
        assert np.abs(ols - theta).max() < 0.05

    def test_deterministic(self):
        a = synthetic_regression(20, 2, np.array([1.0, 1.0]), 0.5, seed=9)
        b = synthetic_regression(20, 2, np.array([1.0, 1.0]), 0.5, seed=9)
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_bad_noise(self):
        with pytest.raises(ValueError):
            synthetic_regression(10, 1, np.array([1.0]), 0.0, seed=0)
