"""Expected prediction-set size against the empirical input measure.

For each candidate threshold the per-input set size defines an integrand
over inputs; a Gaussian process with an RBF kernel is fitted at a node
subset and integrated against the empirical distribution of the evaluation
inputs. Weights are affinely corrected to sum to one so constant integrands
are reproduced exactly, and a plain Monte-Carlo estimator is available as
the high-dimensional fallback.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

_MAX_JITTER = 1e-2
_MIN_SIGNAL_VAR = 1e-12


@dataclass(frozen=True)
class KernelConfig:
    lengthscale: float
    signal_var: float
    jitter: float = 1e-8

    def __post_init__(self):
        if min(self.lengthscale, self.signal_var, self.jitter) <= 0:
            raise ValueError("kernel parameters must be strictly positive")


@dataclass
class SizeCurve:
    """Per-input set sizes evaluated along a sorted threshold grid."""

    lambda_grid: np.ndarray  # (L,)
    per_input_sizes: np.ndarray  # (n_eval, L), each row non-decreasing

    def column(self, j: int) -> np.ndarray:
        return self.per_input_sizes[:, j]


@dataclass(frozen=True)
class BqEstimate:
    mean: float
    variance: float
    n_nodes: int


def set_size_per_input(
    test_scores: np.ndarray,
    candidate_grid: np.ndarray,
    lambda_grid: np.ndarray,
    mode: str = "cardinality",
) -> SizeCurve:
    """Count (or measure) the candidates admitted at every threshold.

    ``mode="cardinality"`` counts grid points; ``mode="width"`` converts the
    count into the grid span (count - 1) * spacing used for intervals.
    """
    lambda_grid = np.asarray(lambda_grid, dtype=float)
    if np.any(np.diff(lambda_grid) < 0):
        raise ValueError("lambda grid must be sorted ascending")
    scores = np.asarray(test_scores, dtype=float)
    if not np.isfinite(scores).all():
        raise ValueError("scores must be finite")
    sorted_rows = np.sort(scores, axis=1)
    counts = np.stack(
        [np.searchsorted(row, lambda_grid, side="right") for row in sorted_rows]
    ).astype(float)
    if mode == "width":
        grid = np.asarray(candidate_grid, dtype=float)
        spacing = float(grid[1] - grid[0]) if len(grid) > 1 else 0.0
        counts = np.maximum(counts - 1.0, 0.0) * spacing
    elif mode != "cardinality":
        raise ValueError(f"unknown size mode {mode!r}")
    return SizeCurve(lambda_grid=lambda_grid, per_input_sizes=counts)


def median_heuristic_lengthscale(X: np.ndarray) -> float:
    """Median pairwise Euclidean distance; 1.0 if all points coincide."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    iu = np.triu_indices(len(X), k=1)
    dists = np.sqrt(d2[iu])
    dists = dists[dists > 0]
    return float(np.median(dists)) if dists.size else 1.0


def farthest_point_nodes(X: np.ndarray, m: int) -> np.ndarray:
    """Greedy max-min subsample of m row indices, seeded at the medoid."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = len(X)
    m = min(m, n)
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    chosen = [int(np.argmin(d2.sum(axis=1)))]
    mind2 = d2[chosen[0]].copy()
    while len(chosen) < m:
        nxt = int(np.argmax(mind2))
        chosen.append(nxt)
        np.minimum(mind2, d2[nxt], out=mind2)
    return np.asarray(sorted(chosen), dtype=int)


def default_kernel(eval_inputs: np.ndarray, node_values: np.ndarray, jitter: float = 1e-8) -> KernelConfig:
    """Median-heuristic lengthscale with the node-value variance as signal."""
    signal = max(float(np.var(np.asarray(node_values, dtype=float))), _MIN_SIGNAL_VAR)
    return KernelConfig(
        lengthscale=median_heuristic_lengthscale(eval_inputs),
        signal_var=signal,
        jitter=jitter,
    )


def _rbf(A: np.ndarray, B: np.ndarray, kernel: KernelConfig) -> np.ndarray:
    d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
    return kernel.signal_var * np.exp(-0.5 * d2 / kernel.lengthscale**2)


def _chol_with_escalation(K: np.ndarray, jitter: float):
    m = K.shape[0]
    while jitter <= _MAX_JITTER:
        try:
            return cho_factor(K + jitter * np.eye(m), lower=True), jitter
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise np.linalg.LinAlgError(
        f"kernel matrix singular even at jitter {_MAX_JITTER:g}"
    )


def bq_expected_size(
    eval_inputs: np.ndarray,
    sizes: np.ndarray,
    nodes: np.ndarray,
    kernel: KernelConfig,
) -> BqEstimate:
    """GP quadrature of a size column against the empirical input measure.

    The estimate is w^T g at the nodes with w = K^{-1} kbar, where kbar is
    the kernel mean over all evaluation inputs; w is then shifted along
    K^{-1} 1 so the weights sum to one. The variance is the posterior
    variance of the integral under the same constant-mean model, clamped at
    zero.
    """
    X = np.atleast_2d(np.asarray(eval_inputs, dtype=float))
    g = np.asarray(sizes, dtype=float)
    node_idx = np.asarray(nodes, dtype=int)
    if g.shape[0] != X.shape[0]:
        raise ValueError("sizes must align with eval_inputs rows")
    if node_idx.size == 0:
        raise ValueError("need at least one node")
    Xn = X[node_idx]
    gn = g[node_idx]
    m = len(node_idx)

    K = _rbf(Xn, Xn, kernel)
    chol, _ = _chol_with_escalation(K, kernel.jitter)
    kbar = _rbf(Xn, X, kernel).mean(axis=1)
    qbar = float(_rbf(X, X, kernel).mean())

    w = cho_solve(chol, kbar)
    Kinv1 = cho_solve(chol, np.ones(m))
    denom = float(np.ones(m) @ Kinv1)
    shift = (1.0 - float(w.sum())) / denom
    w = w + shift * Kinv1

    mean = float(w @ gn)
    var = qbar - float(kbar @ cho_solve(chol, kbar))
    var += (1.0 - float(kbar @ Kinv1)) ** 2 / denom
    return BqEstimate(mean=mean, variance=max(var, 0.0), n_nodes=m)


def mc_expected_size(sizes: np.ndarray) -> float:
    """Plain empirical mean of a size column (high-dimensional fallback)."""
    sizes = np.asarray(sizes, dtype=float)
    if sizes.size == 0:
        raise ValueError("empty size column")
    return float(sizes.mean())


def candidate_grid(cal_scores: np.ndarray, strategy: str = "score_quantiles", size: int = 50) -> np.ndarray:
    """Sorted candidate thresholds ending in a +inf sentinel.

    ``score_quantiles`` takes unique empirical quantiles of the calibration
    scores (values that actually occur); ``uniform`` spaces candidates
    evenly over the observed score range. The sentinel guarantees a
    threshold with zero calibration loss always exists.
    """
    cal_scores = np.asarray(cal_scores, dtype=float)
    if cal_scores.size == 0:
        raise ValueError("empty calibration score vector")
    if size < 2:
        raise ValueError("size must be at least 2")
    if strategy == "score_quantiles":
        qs = np.linspace(0.0, 1.0, size)
        vals = np.quantile(cal_scores, qs, method="lower")
    elif strategy == "uniform":
        vals = np.linspace(cal_scores.min(), cal_scores.max(), size)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    return np.append(np.unique(vals), math.inf)


def size_curve_to_csv(curve: SizeCurve, path) -> None:
    header = ",".join(f"lambda={v:.6g}" for v in curve.lambda_grid)
    np.savetxt(path, curve.per_input_sizes, delimiter=",", header=header)
