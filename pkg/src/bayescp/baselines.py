"""Comparison methods: Lasso split-CP, Bayesian credible sets, MSP ranking."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .conformal import Threshold, split_threshold
from .posterior import PosteriorDraws, predictive_samples


@dataclass
class LassoModel:
    coefficients: np.ndarray
    intercept: float
    penalty: float
    converged: bool
    n_sweeps: int
    objective_path: list[float] = field(default_factory=list, repr=False)


@dataclass(frozen=True)
class Interval:
    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, y: float) -> bool:
        return self.lower <= y <= self.upper


def _lasso_objective(X, y, coef, intercept, penalty):
    n = len(y)
    resid = y - X @ coef - intercept
    return 0.5 * float(resid @ resid) / n + penalty * float(np.sum(np.abs(coef)))


def lasso_fit(
    X: np.ndarray,
    y: np.ndarray,
    penalty: float,
    max_iters: int = 10000,
    tol: float = 1e-8,
) -> LassoModel:
    """Coordinate descent for (1/2n)||y - X theta - theta0||^2 + penalty * ||theta||_1.

    Converged when the sup-norm coefficient change over a sweep drops below
    ``tol``; non-convergence is flagged on the result, not raised.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if penalty < 0:
        raise ValueError("penalty must be non-negative")
    n, d = X.shape
    col_sq = (X**2).sum(axis=0) / n
    coef = np.zeros(d)
    intercept = float(y.mean())
    resid = y - intercept

    objective_path = [_lasso_objective(X, y, coef, intercept, penalty)]
    converged = False
    sweep = 0
    for sweep in range(1, max_iters + 1):
        max_delta = 0.0
        for j in range(d):
            if col_sq[j] == 0.0:
                continue
            old = coef[j]
            rho = float(X[:, j] @ (resid + old * X[:, j])) / n
            new = np.sign(rho) * max(abs(rho) - penalty, 0.0) / col_sq[j]
            if new != old:
                resid += (old - new) * X[:, j]
                coef[j] = new
                max_delta = max(max_delta, abs(new - old))
        new_intercept = intercept + float(resid.mean())
        if new_intercept != intercept:
            resid -= new_intercept - intercept
            max_delta = max(max_delta, abs(new_intercept - intercept))
            intercept = new_intercept
        objective_path.append(_lasso_objective(X, y, coef, intercept, penalty))
        if max_delta < tol:
            converged = True
            break
    return LassoModel(coef, intercept, penalty, converged, sweep, objective_path)


def lasso_predict(model: LassoModel, X: np.ndarray) -> np.ndarray:
    return np.atleast_2d(np.asarray(X, dtype=float)) @ model.coefficients + model.intercept


def split_cp_residual(
    model: LassoModel,
    X_cal: np.ndarray,
    y_cal: np.ndarray,
    x_test: np.ndarray,
    alpha: float,
) -> tuple[Interval, Threshold]:
    """Absolute-residual split CP around the point prediction.

    Returns the interval for ``x_test`` plus the calibrated threshold so
    batch callers can reuse it.
    """
    scores = np.abs(np.asarray(y_cal, dtype=float) - lasso_predict(model, X_cal))
    thr = split_threshold(scores, alpha)
    pred = float(lasso_predict(model, x_test)[0])
    return Interval(pred - thr.value, pred + thr.value), thr


def bci_regression_interval(
    draws: PosteriorDraws,
    x: np.ndarray,
    alpha: float,
    m_per_draw: int = 1,
    seed: int = 0,
    hpd: bool = False,
) -> Interval:
    """Credible interval from posterior-predictive samples.

    Equal-tailed (alpha/2, 1 - alpha/2) quantiles by default; ``hpd`` picks
    the shortest window containing mass 1 - alpha instead.
    """
    samples = np.sort(predictive_samples(draws, x, m_per_draw, seed))
    n = samples.size
    if hpd:
        k = int(np.ceil((1.0 - alpha) * n))
        k = min(max(k, 1), n)
        widths = samples[k - 1 :] - samples[: n - k + 1]
        i = int(np.argmin(widths))
        return Interval(float(samples[i]), float(samples[i + k - 1]))
    lo, hi = np.quantile(samples, [alpha / 2.0, 1.0 - alpha / 2.0])
    return Interval(float(lo), float(hi))


def bci_classification_set(p1: float, alpha: float) -> list[int]:
    """Smallest subset of {0, 1} with predictive mass >= 1 - alpha.

    Labels enter in order of decreasing probability; a tie at 0.5 admits
    label 1 first (immaterial to the resulting set size).
    """
    if not 0.0 <= p1 <= 1.0:
        raise ValueError("p1 must lie in [0, 1]")
    order = [1, 0] if p1 >= 0.5 else [0, 1]
    probs = {1: p1, 0: 1.0 - p1}
    out: list[int] = []
    mass = 0.0
    for label in order:
        out.append(label)
        mass += probs[label]
        if mass >= 1.0 - alpha:
            break
    return out


def msp_rank(class_means: np.ndarray) -> list[tuple[int, float]]:
    """Labels sorted by decreasing predictive mean, ties by label index."""
    means = np.asarray(class_means, dtype=float)
    if not np.isfinite(means).all():
        raise ValueError("predictive means must be finite")
    order = np.argsort(-means, kind="stable")
    return [(int(i), float(means[i])) for i in order]
