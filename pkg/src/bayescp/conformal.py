"""Split conformal calibration, prediction sets, and L+ risk control.

The L+ statistic mixes the sorted calibration losses with flat-Dirichlet
weights and reserves one simplex coordinate for the loss bound B; it
stochastically upper-bounds the test miscoverage risk under exchangeability.
Feasibility of a threshold asks that L+ stay below the risk level alpha with
Monte-Carlo probability at least 1 - beta.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta as beta_dist

from .posterior import DENSITY_FLOOR, PosteriorDraws, linear_predictor, loglik_from_predictor

# Guards quantile-rank arithmetic against float noise in (n+1)*(1-alpha).
_CEIL_EPS = 1e-9


@dataclass(frozen=True)
class RiskConfig:
    """Risk level, confidence parameter, and Dirichlet Monte-Carlo budget."""

    alpha: float
    beta: float
    loss_bound: float = 1.0
    dirichlet_draws: int = 2000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.loss_bound <= 0:
            raise ValueError("loss_bound must be positive")
        if self.dirichlet_draws < 1:
            raise ValueError("dirichlet_draws must be at least 1")


@dataclass(frozen=True)
class Threshold:
    value: float
    method: str  # "split_quantile" | "crc_lplus"
    feasible: bool = True


@dataclass
class PredictionSet:
    """Candidate labels kept at a threshold, with cardinality and grid width."""

    included: np.ndarray  # boolean mask over the candidate grid
    candidate_grid: np.ndarray
    task_kind: str  # "regression" | "classification"
    n_degenerate: int = 0  # candidates dropped for all-zero reweighting mass

    @property
    def size(self) -> int:
        return int(self.included.sum())

    @property
    def width(self) -> float:
        """Grid span of included points: (count - 1) * spacing, 0 if <= 1 point."""
        k = self.size
        if k <= 1:
            return 0.0
        spacing = float(self.candidate_grid[1] - self.candidate_grid[0])
        return (k - 1) * spacing

    @property
    def labels(self) -> np.ndarray:
        return self.candidate_grid[self.included]


def conformal_rank(n: int, alpha: float) -> int:
    """k = ceil((n+1)(1-alpha)), protected against float round-up."""
    return int(math.ceil((n + 1) * (1.0 - alpha) - _CEIL_EPS))


def split_threshold(cal_scores: np.ndarray, alpha: float) -> Threshold:
    """Classical split-CP threshold: the k-th smallest calibration score.

    When k exceeds n (calibration set too small for the level) the threshold
    is +inf with the feasible flag cleared, i.e. the full prediction set.
    """
    cal_scores = np.asarray(cal_scores, dtype=float)
    n = cal_scores.size
    if n == 0:
        raise ValueError("empty calibration score vector")
    k = conformal_rank(n, alpha)
    if k > n:
        return Threshold(value=math.inf, method="split_quantile", feasible=False)
    value = float(np.sort(cal_scores)[k - 1])
    return Threshold(value=value, method="split_quantile", feasible=True)


def build_set(
    test_score_row: np.ndarray,
    candidate_grid: np.ndarray,
    lam: float,
    task_kind: str = "regression",
) -> PredictionSet:
    """All candidates whose score is at most lam; may be empty."""
    scores = np.asarray(test_score_row, dtype=float)
    return PredictionSet(
        included=scores <= lam,
        candidate_grid=np.asarray(candidate_grid, dtype=float),
        task_kind=task_kind,
    )


def miscoverage_losses(cal_scores: np.ndarray, lam: float) -> np.ndarray:
    """Binary miscoverage loss per calibration point: 1 if the score exceeds lam."""
    return (np.asarray(cal_scores, dtype=float) > lam).astype(float)


def sample_simplex(n_parts: int, m: int, seed: int) -> np.ndarray:
    """m draws from the flat Dirichlet on the (n_parts-1)-simplex.

    Sampled as sorted-uniform spacings: gaps of n_parts - 1 sorted uniforms
    padded with {0, 1}.
    """
    if n_parts < 1 or m < 1:
        raise ValueError("n_parts and m must be at least 1")
    rng = np.random.default_rng(seed)
    if n_parts == 1:
        return np.ones((m, 1))
    u = np.sort(rng.random((m, n_parts - 1)), axis=1)
    padded = np.concatenate(
        [np.zeros((m, 1)), u, np.ones((m, 1))], axis=1
    )
    return np.diff(padded, axis=1)


def lplus_draws(
    losses: np.ndarray,
    bound: float = 1.0,
    m: int = 2000,
    seed: int = 0,
    simplex: np.ndarray | None = None,
) -> np.ndarray:
    """Monte-Carlo draws of the L+ statistic for one loss vector.

    Each draw is sum_i U_i * loss_(i) + U_{n+1} * bound with U flat-Dirichlet
    on the (n+1)-simplex and losses sorted ascending. Passing ``simplex``
    (shape (m, n+1)) reuses common random numbers across thresholds.
    """
    losses = np.sort(np.asarray(losses, dtype=float))
    n = losses.size
    if np.any(losses < 0) or np.any(losses > bound):
        raise ValueError("losses must lie in [0, bound]")
    if simplex is None:
        simplex = sample_simplex(n + 1, m, seed)
    elif simplex.shape[1] != n + 1:
        raise ValueError("simplex must have n+1 columns")
    return simplex[:, :n] @ losses + simplex[:, n] * bound


def lplus_prob_exact_binary(n_ones: int, n: int, alpha: float) -> float:
    """Exact P[L+ <= alpha] for binary losses with bound 1.

    The n_ones unit losses plus the bound slot collect n_ones + 1 of the
    n + 1 flat-Dirichlet coordinates, so L+ ~ Beta(n_ones + 1, n - n_ones).
    """
    if not 0 <= n_ones <= n:
        raise ValueError("n_ones must lie in [0, n]")
    if n_ones == n:
        return 1.0 if alpha >= 1.0 else 0.0
    return float(beta_dist.cdf(alpha, n_ones + 1, n - n_ones))


def crc_feasible(
    losses: np.ndarray,
    risk: RiskConfig,
    simplex: np.ndarray | None = None,
) -> tuple[bool, float]:
    """Check P[L+ <= alpha] >= 1 - beta by Dirichlet Monte Carlo.

    Returns the decision together with the probability estimate, which the
    reports record. A pre-sampled ``simplex`` gives common random numbers.
    """
    draws = lplus_draws(
        losses,
        bound=risk.loss_bound,
        m=risk.dirichlet_draws,
        seed=risk.seed,
        simplex=simplex,
    )
    prob = float(np.mean(draws <= risk.alpha))
    return prob >= 1.0 - risk.beta, prob


def threshold_to_json(thr: Threshold, prob: float | None = None, risk: RiskConfig | None = None) -> str:
    obj = {"lambda": thr.value, "method": thr.method, "feasible": thr.feasible}
    if prob is not None:
        obj["prob_lplus_le_alpha"] = prob
    if risk is not None:
        obj.update(
            {
                "alpha": risk.alpha,
                "beta": risk.beta,
                "dirichlet_draws": risk.dirichlet_draws,
                "seed": risk.seed,
            }
        )
    return json.dumps(obj, sort_keys=True)


def cb_candidate_ranks(
    draws: PosteriorDraws,
    cal_like: np.ndarray,
    x_test: np.ndarray,
    candidates: np.ndarray,
) -> np.ndarray:
    """Full-conformal rank of each candidate label at one test input.

    For each candidate the posterior draws are reweighted by that
    candidate's own likelihood at ``x_test``; all calibration scores plus
    the candidate's score are recomputed under the reweighted predictive,
    and the returned rank is 1 + #(calibration scores strictly below the
    candidate score). Candidates whose reweighting mass vanishes get an
    infinite rank (they can never enter a set).

    ``cal_like`` is the (n_cal, T) matrix of per-draw calibration-pair
    likelihoods, precomputed once per calibration set.
    """
    candidates = np.asarray(candidates, dtype=float)
    mu_test = linear_predictor(draws, x_test)
    cand_loglik = np.concatenate(
        [loglik_from_predictor(draws, mu_test, float(y)) for y in candidates]
    )
    cand_like = np.exp(cand_loglik)  # (K, T)
    totals = cand_like.sum(axis=1)
    ok = totals > 0
    ranks = np.full(len(candidates), math.inf)
    if not ok.any():
        return ranks
    W = cand_like[ok] / totals[ok, None]
    cal_pred = np.maximum(W @ cal_like.T, DENSITY_FLOOR)  # (K_ok, n_cal)
    test_pred = np.maximum((W * cand_like[ok]).sum(axis=1), DENSITY_FLOOR)
    s_cal = -np.log(cal_pred)
    s_test = -np.log(test_pred)
    ranks[ok] = 1.0 + np.sum(s_cal < s_test[:, None], axis=1)
    return ranks


def cal_likelihoods(draws: PosteriorDraws, X_cal: np.ndarray, y_cal: np.ndarray) -> np.ndarray:
    """Per-draw likelihood matrix (n_cal, T) of the calibration pairs."""
    mu_cal = linear_predictor(draws, X_cal)
    return np.exp(loglik_from_predictor(draws, mu_cal, np.asarray(y_cal, dtype=float)))


def cb_full_conformal(
    draws: PosteriorDraws,
    X_cal: np.ndarray,
    y_cal: np.ndarray,
    x_test: np.ndarray,
    candidate_grid: np.ndarray,
    alpha: float,
    cal_like: np.ndarray | None = None,
) -> PredictionSet:
    """Full-conformal set via importance reweighting of posterior draws.

    A candidate stays iff its rank among the n+1 reweighted scores is within
    the conformal quantile; degenerate candidates (all-zero reweighting
    likelihood) are excluded and counted on the result. Pass ``cal_like``
    from :func:`cal_likelihoods` to reuse it across test points.
    """
    candidate_grid = np.asarray(candidate_grid, dtype=float)
    n = len(y_cal)
    if n == 0:
        raise ValueError("calibration set must be non-empty")
    if cal_like is None:
        cal_like = cal_likelihoods(draws, X_cal, y_cal)
    ranks = cb_candidate_ranks(draws, cal_like, x_test, candidate_grid)
    k = conformal_rank(n, alpha)
    return PredictionSet(
        included=ranks <= k,
        candidate_grid=candidate_grid,
        task_kind="regression" if draws.model_kind == "sparse_linear" else "classification",
        n_degenerate=int(np.sum(np.isinf(ranks))),
    )


def cb_covers(
    draws: PosteriorDraws,
    cal_like: np.ndarray,
    x_test: np.ndarray,
    y_true: float,
    alpha: float,
) -> bool:
    """Full-conformal coverage indicator: rank test of the true label itself."""
    rank = cb_candidate_ranks(draws, cal_like, x_test, np.asarray([y_true]))[0]
    return rank <= conformal_rank(cal_like.shape[0], alpha)
