"""Fast invariant suite behind the CLI's selftest subcommand.

Each check is a self-contained assertion over synthetic inputs; the runner
prints one PASS/FAIL line per check and reports the failure count.
"""

from __future__ import annotations

import math
import traceback

import numpy as np

from .baselines import lasso_fit
from .conformal import (
    RiskConfig,
    build_set,
    crc_feasible,
    lplus_draws,
    miscoverage_losses,
    sample_simplex,
    split_threshold,
)
from .datasets import Dataset, apply_standardizer, fit_standardizer, make_split
from .optimizer import reselect_beta, select_lambda
from .quadrature import KernelConfig, bq_expected_size, farthest_point_nodes
from .scores import aoi_predictive, aoi_weights, mean_predictive


def check_aoi_cauchy_schwarz():
    rng = np.random.default_rng(0)
    for _ in range(200):
        f = rng.random(rng.integers(1, 50)) + 1e-12
        assert aoi_predictive(f) >= mean_predictive(f) - 1e-12


def check_aoi_scale_covariance():
    rng = np.random.default_rng(1)
    for _ in range(100):
        f = rng.random(20) + 1e-9
        c = float(rng.uniform(0.1, 50))
        assert np.allclose(aoi_weights(c * f), aoi_weights(f))
        assert math.isclose(aoi_predictive(c * f), c * aoi_predictive(f), rel_tol=1e-10)


def check_set_size_monotone():
    rng = np.random.default_rng(2)
    grid = np.linspace(0, 1, 25)
    for _ in range(50):
        scores = rng.random(25) * 10
        sizes = [build_set(scores, grid, lam).size for lam in np.sort(rng.random(12) * 10)]
        assert all(a <= b for a, b in zip(sizes, sizes[1:]))
        losses = [miscoverage_losses(scores, lam).sum() for lam in np.sort(rng.random(12) * 10)]
        assert all(a >= b for a, b in zip(losses, losses[1:]))


def check_lplus_mean():
    losses = np.array([0.0] * 7 + [1.0] * 3)
    draws = lplus_draws(losses, bound=1.0, m=40000, seed=3)
    expected = (losses.sum() + 1.0) / (len(losses) + 1)
    se = draws.std(ddof=1) / math.sqrt(len(draws))
    assert abs(draws.mean() - expected) < 3 * se


def check_split_threshold_rank():
    thr = split_threshold(np.arange(1.0, 10.0), alpha=0.2)
    assert thr.value == 8.0
    thr = split_threshold(np.arange(1.0, 20.0), alpha=0.1)
    assert thr.value == 18.0
    thr = split_threshold(np.array([1.0, 2.0, 3.0]), alpha=0.1)
    assert math.isinf(thr.value) and not thr.feasible


def check_bq_constant_exactness():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 3))
    nodes = farthest_point_nodes(X, 8)
    kernel = KernelConfig(lengthscale=1.5, signal_var=1.0)
    est = bq_expected_size(X, np.full(30, 7.25), nodes, kernel)
    assert abs(est.mean - 7.25) < 1e-8


def check_bq_matches_mc_full_nodes():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((12, 2))
    g = rng.random(12) * 4
    kernel = KernelConfig(lengthscale=2.0, signal_var=1.0, jitter=1e-10)
    est = bq_expected_size(X, g, np.arange(12), kernel)
    assert abs(est.mean - g.mean()) < 1e-6


def check_lasso_soft_threshold():
    rng = np.random.default_rng(6)
    x = rng.standard_normal(200)
    x = (x - x.mean()) / x.std()  # population-normalized column
    y = x.copy()  # OLS coefficient exactly 1
    model = lasso_fit(x[:, None], y, penalty=0.4)
    assert abs(model.coefficients[0] - 0.6) < 1e-6
    assert all(a >= b - 1e-12 for a, b in zip(model.objective_path, model.objective_path[1:]))


def check_standardizer_leakage_free():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((40, 3)) * 5 + 2
    y = rng.standard_normal(40)
    data = Dataset(X, y, ("a", "b", "c"), "regression")
    split = make_split(40, (0.5, 0.25, 0.25), seed=0)
    std = fit_standardizer(data, split.train_idx)
    out = apply_standardizer(std, data)
    Xtr = out.features[split.train_idx]
    assert np.abs(Xtr.mean(axis=0)).max() < 1e-10
    assert np.abs(Xtr.std(axis=0, ddof=1) - 1).max() < 1e-10
    cal_means = data.features[split.cal_idx].mean(axis=0)
    assert not np.allclose(cal_means, std.feature_means)


def check_lambda_star_monotone_in_beta():
    rng = np.random.default_rng(8)
    cal_scores = np.sort(rng.random(60) * 3)
    lambdas = np.append(np.quantile(cal_scores, np.linspace(0, 1, 20), method="lower"), math.inf)
    sizes = np.linspace(0.5, 4.0, len(lambdas))
    simplex = sample_simplex(61, 2000, seed=9)
    probs = []
    for lam in lambdas:
        _, p = crc_feasible(
            miscoverage_losses(cal_scores, lam), RiskConfig(0.2, 0.5), simplex=simplex
        )
        probs.append(p)
    probs = np.asarray(probs)
    base = select_lambda(lambdas, sizes, np.zeros_like(sizes), probs >= 0.5, probs)
    prev = math.inf
    for beta in (0.5, 0.6, 0.7, 0.8, 0.9):
        sol = reselect_beta(base, beta)
        assert sol.lambda_star <= prev + 1e-12
        prev = sol.lambda_star


CHECKS = [
    check_aoi_cauchy_schwarz,
    check_aoi_scale_covariance,
    check_set_size_monotone,
    check_lplus_mean,
    check_split_threshold_rank,
    check_bq_constant_exactness,
    check_bq_matches_mc_full_nodes,
    check_lasso_soft_threshold,
    check_standardizer_leakage_free,
    check_lambda_star_monotone_in_beta,
]


def run_selftest(verbose: bool = True) -> int:
    """Run every invariant check; returns the number of failures."""
    failures = 0
    for check in CHECKS:
        name = check.__name__.removeprefix("check_")
        try:
            check()
            if verbose:
                print(f"PASS {name}")
        except Exception:
            failures += 1
            print(f"FAIL {name}")
            traceback.print_exc()
    return failures
