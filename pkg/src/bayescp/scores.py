"""Non-conformity scores built from posterior draws.

Two predictive functionals are supported: the add-one-in reweighted density
(weights proportional to each draw's own likelihood, giving sum f^2 / sum f)
and the plain posterior-predictive mean. Both are turned into scores via
-log. A single shared routine scores calibration and test points, so the
scoring rule is identical on both sides by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .posterior import (
    DENSITY_FLOOR,
    LOG_DENSITY_FLOOR,
    PosteriorDraws,
    linear_predictor,
    loglik_from_predictor,
)

SCORE_KINDS = ("aoi_neglog", "mean_neglog", "residual")


@dataclass
class ScoreMatrix:
    """Calibration scores plus test scores over a candidate-label grid."""

    cal_scores: np.ndarray | None  # (n_cal,)
    test_scores: np.ndarray  # (n_test, K)
    score_kind: str
    candidate_grid: np.ndarray  # (K,)

    def __post_init__(self):
        if self.score_kind not in SCORE_KINDS:
            raise ValueError(f"unknown score_kind {self.score_kind!r}")
        if self.cal_scores is not None and not np.isfinite(self.cal_scores).all():
            raise ValueError("calibration scores must be finite")
        if not np.isfinite(self.test_scores).all():
            raise ValueError("test scores must be finite")
        if self.test_scores.shape[1] != len(self.candidate_grid):
            raise ValueError("test score columns must align with the candidate grid")


def aoi_weights(likes: np.ndarray) -> np.ndarray:
    """Importance weights proportional to each draw's likelihood."""
    likes = np.asarray(likes, dtype=float)
    if np.any(likes < 0):
        raise ValueError("likelihoods must be non-negative")
    total = likes.sum()
    if total <= 0:
        raise ValueError("cannot normalize an all-zero likelihood vector")
    return likes / total


def aoi_predictive(likes: np.ndarray) -> float:
    """Reweighted predictive density sum f^2 / sum f."""
    w = aoi_weights(likes)
    return float(w @ np.asarray(likes, dtype=float))


def mean_predictive(likes: np.ndarray) -> float:
    """Plain posterior-predictive density (arithmetic mean over draws)."""
    likes = np.asarray(likes, dtype=float)
    if likes.size == 0:
        raise ValueError("empty likelihood vector")
    return float(likes.mean())


def neglog_score(density: float) -> float:
    """-log density with the global floor applied."""
    return float(-np.log(max(float(density), DENSITY_FLOOR)))


def predictive_logdensity(loglik: np.ndarray, score_kind: str) -> np.ndarray:
    """Log predictive density along the last axis of a per-draw loglik array.

    This is the shared scoring routine: calibration and test points both go
    through it, with log-sum-exp normalization before any exponentiation.
    """
    loglik = np.maximum(loglik, LOG_DENSITY_FLOOR)
    if score_kind == "aoi_neglog":
        return logsumexp(2.0 * loglik, axis=-1) - logsumexp(loglik, axis=-1)
    if score_kind == "mean_neglog":
        return logsumexp(loglik, axis=-1) - np.log(loglik.shape[-1])
    raise ValueError(f"score_kind {score_kind!r} has no predictive density")


def scores_from_loglik(loglik: np.ndarray, score_kind: str) -> np.ndarray:
    """Non-conformity scores -log p_hat from per-draw log likelihoods."""
    return np.minimum(-predictive_logdensity(loglik, score_kind), -LOG_DENSITY_FLOOR)


def compute_cal_scores(
    draws: PosteriorDraws,
    X_cal: np.ndarray,
    y_cal: np.ndarray,
    score_kind: str = "aoi_neglog",
) -> np.ndarray:
    """Score each calibration pair (X_i, Y_i) under the chosen predictive."""
    mu = linear_predictor(draws, X_cal)
    ll = loglik_from_predictor(draws, mu, np.asarray(y_cal, dtype=float))
    return scores_from_loglik(ll, score_kind)


def compute_test_scores(
    draws: PosteriorDraws,
    X_test: np.ndarray,
    candidate_grid: np.ndarray,
    score_kind: str = "aoi_neglog",
    cal_scores: np.ndarray | None = None,
) -> ScoreMatrix:
    """Score every (test input, candidate label) pair.

    Candidates are processed one at a time to keep the working set at
    (n_test, T) regardless of grid size.
    """
    candidate_grid = np.asarray(candidate_grid, dtype=float)
    mu = linear_predictor(draws, X_test)
    cols = []
    for y in candidate_grid:
        ll = loglik_from_predictor(draws, mu, float(y))
        cols.append(scores_from_loglik(ll, score_kind))
    return ScoreMatrix(
        cal_scores=cal_scores,
        test_scores=np.column_stack(cols),
        score_kind=score_kind,
        candidate_grid=candidate_grid,
    )


def score_matrix_to_csv(sm: ScoreMatrix, prefix: str | Path) -> tuple[Path, Path]:
    """Write test scores as CSV (one row per input) with a JSON header file."""
    prefix = Path(prefix)
    csv_path = prefix.with_suffix(".csv")
    json_path = prefix.with_suffix(".json")
    np.savetxt(csv_path, sm.test_scores, delimiter=",")
    json_path.write_text(
        json.dumps(
            {
                "score_kind": sm.score_kind,
                "candidate_grid": sm.candidate_grid.tolist(),
                "cal_scores": None if sm.cal_scores is None else sm.cal_scores.tolist(),
            },
            sort_keys=True,
        )
    )
    return csv_path, json_path


def score_matrix_from_csv(prefix: str | Path) -> ScoreMatrix:
    prefix = Path(prefix)
    mat = np.loadtxt(prefix.with_suffix(".csv"), delimiter=",", ndmin=2)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    cal = meta["cal_scores"]
    return ScoreMatrix(
        cal_scores=None if cal is None else np.asarray(cal, dtype=float),
        test_scores=mat,
        score_kind=meta["score_kind"],
        candidate_grid=np.asarray(meta["candidate_grid"], dtype=float),
    )
