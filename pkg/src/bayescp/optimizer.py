"""Risk-constrained threshold selection: the end-to-end calibration path.

Candidate thresholds come from calibration-score quantiles (with a +inf
sentinel), expected set sizes are estimated per candidate by Bayesian
quadrature, feasibility is checked with the L+ bound under common random
numbers, and the smallest-size feasible candidate wins.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .conformal import RiskConfig, crc_feasible, miscoverage_losses, sample_simplex
from .posterior import PosteriorDraws
from .quadrature import (
    KernelConfig,
    bq_expected_size,
    candidate_grid,
    farthest_point_nodes,
    mc_expected_size,
    median_heuristic_lengthscale,
    set_size_per_input,
)
from .scores import compute_cal_scores, compute_test_scores

_MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class CandidateRow:
    lam: float
    bq_mean: float
    bq_var: float
    feasible: bool
    prob: float

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "bq_mean": self.bq_mean,
            "bq_var": self.bq_var,
            "feasible": self.feasible,
            "prob_lplus_le_alpha": self.prob,
        }


@dataclass
class BcpSolution:
    lambda_star: float
    bq_size_at_star: float
    feasibility_prob: float
    candidate_table: list[CandidateRow]
    fallback_used: bool
    bq_monotone: bool = True
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        lams = [row.lam for row in self.candidate_table]
        if self.lambda_star not in lams:
            raise ValueError("lambda_star must appear in the candidate table")
        if any(row.feasible for row in self.candidate_table):
            chosen = self.candidate_table[lams.index(self.lambda_star)]
            if not chosen.feasible:
                raise ValueError("a feasible candidate exists but an infeasible one was chosen")


def select_lambda(
    lambdas: np.ndarray,
    bq_means: np.ndarray,
    bq_vars: np.ndarray,
    feasible: np.ndarray,
    probs: np.ndarray,
) -> BcpSolution:
    """Pick the feasible candidate with the smallest estimated set size.

    Ties break toward the smaller threshold; with nothing feasible the
    sentinel (largest candidate) is returned with ``fallback_used`` set.
    The selection is cross-checked against the smallest-feasible scan, which
    must agree whenever the size estimates are non-decreasing.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if lambdas.size == 0:
        raise ValueError("empty candidate grid")
    bq_means = np.asarray(bq_means, dtype=float)
    bq_vars = np.asarray(bq_vars, dtype=float)
    feasible = np.asarray(feasible, dtype=bool)
    probs = np.asarray(probs, dtype=float)

    table = [
        CandidateRow(float(l), float(m), float(v), bool(f), float(p))
        for l, m, v, f, p in zip(lambdas, bq_means, bq_vars, feasible, probs)
    ]
    monotone = bool(np.all(np.diff(bq_means) >= -_MONOTONE_TOL))
    if np.any(feasible):
        idx_feas = np.flatnonzero(feasible)
        best = idx_feas[np.argmin(bq_means[idx_feas])]  # argmin keeps the first = smallest lam
        if monotone and best != idx_feas[0]:
            raise RuntimeError(
                "selection mismatch: size-argmin disagrees with smallest feasible "
                "threshold despite monotone size estimates"
            )
        chosen, fallback = int(best), False
    else:
        chosen, fallback = int(len(table) - 1), True
    return BcpSolution(
        lambda_star=table[chosen].lam,
        bq_size_at_star=table[chosen].bq_mean,
        feasibility_prob=table[chosen].prob,
        candidate_table=table,
        fallback_used=fallback,
        bq_monotone=monotone,
    )


def bcp_calibrate(
    draws: PosteriorDraws,
    X_cal: np.ndarray,
    y_cal: np.ndarray,
    label_candidates: np.ndarray,
    risk: RiskConfig,
    *,
    kernel: KernelConfig | None = None,
    eval_inputs: np.ndarray | None = None,
    n_candidates: int = 20,
    max_nodes: int = 64,
    use_mc: bool = False,
    score_kind: str = "aoi_neglog",
    asymmetric: bool = False,
    cal_scores: np.ndarray | None = None,
) -> BcpSolution:
    """Calibrate the prediction-set threshold end to end.

    Composes calibration scoring, candidate-threshold generation, per-input
    set sizes over ``label_candidates``, size estimation per candidate
    (GP quadrature, or the empirical mean with ``use_mc``), and the L+
    feasibility check with one shared Dirichlet matrix. Deterministic given
    the draws and ``risk.seed``.

    ``eval_inputs`` defaults to the calibration inputs (their labels are
    never touched); ``asymmetric`` scores calibration points with the plain
    posterior-predictive mean while test-side scoring keeps ``score_kind``.
    """
    X_cal = np.asarray(X_cal, dtype=float)
    if cal_scores is None:
        cal_kind = "mean_neglog" if asymmetric else score_kind
        cal_scores = compute_cal_scores(draws, X_cal, y_cal, cal_kind)
    lambdas = candidate_grid(cal_scores, "score_quantiles", n_candidates)

    if eval_inputs is None:
        eval_inputs = X_cal
    eval_inputs = np.asarray(eval_inputs, dtype=float)
    sm = compute_test_scores(draws, eval_inputs, label_candidates, score_kind)
    mode = "width" if draws.model_kind == "sparse_linear" else "cardinality"
    curve = set_size_per_input(sm.test_scores, label_candidates, lambdas, mode=mode)

    if use_mc:
        bq_means = np.array([mc_expected_size(curve.column(j)) for j in range(len(lambdas))])
        bq_vars = np.zeros_like(bq_means)
        n_nodes = len(eval_inputs)
    else:
        nodes = farthest_point_nodes(eval_inputs, max_nodes)
        lengthscale = (
            kernel.lengthscale if kernel is not None else median_heuristic_lengthscale(eval_inputs)
        )
        jitter = kernel.jitter if kernel is not None else 1e-8
        bq_means, bq_vars = [], []
        for j in range(len(lambdas)):
            col = curve.column(j)
            if kernel is not None:
                kj = kernel
            else:
                # One independent GP per threshold: the signal variance tracks
                # that threshold's node values.
                signal = max(float(np.var(col[nodes])), 1e-12)
                kj = KernelConfig(lengthscale, signal, jitter)
            est = bq_expected_size(eval_inputs, col, nodes, kj)
            bq_means.append(est.mean)
            bq_vars.append(est.variance)
        bq_means = np.asarray(bq_means)
        bq_vars = np.asarray(bq_vars)
        n_nodes = len(nodes)

    simplex = sample_simplex(len(y_cal) + 1, risk.dirichlet_draws, risk.seed)
    feas, probs = [], []
    for lam in lambdas:
        losses = miscoverage_losses(cal_scores, lam)
        ok, prob = crc_feasible(losses, risk, simplex=simplex)
        feas.append(ok)
        probs.append(prob)

    sol = select_lambda(lambdas, bq_means, bq_vars, feas, probs)
    sol.diagnostics = {
        "n_nodes": n_nodes,
        "score_kind": score_kind,
        "asymmetric": asymmetric,
        "use_mc": use_mc,
        "risk_seed": risk.seed,
    }
    if not sol.bq_monotone:
        warnings.warn(
            "BQ size estimates are not monotone along the threshold grid "
            "(GP smoothing artefact); selection still honours feasibility",
            RuntimeWarning,
            stacklevel=2,
        )
    return sol


def reselect_beta(sol: BcpSolution, beta: float) -> BcpSolution:
    """Re-run the selection for a new confidence parameter.

    The candidate table's size estimates and L+ probabilities do not depend
    on beta, so scanning beta only flips feasibility flags; reusing the table
    keeps the common random numbers of the original calibration.
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    rows = sol.candidate_table
    out = select_lambda(
        np.array([r.lam for r in rows]),
        np.array([r.bq_mean for r in rows]),
        np.array([r.bq_var for r in rows]),
        np.array([r.prob >= 1.0 - beta for r in rows]),
        np.array([r.prob for r in rows]),
    )
    out.diagnostics = {**sol.diagnostics, "beta": beta}
    return out


def _finite_or_repr(x):
    if isinstance(x, float) and not np.isfinite(x):
        return repr(x)
    return x


def solution_to_json(sol: BcpSolution) -> str:
    return json.dumps(
        {
            "lambda_star": _finite_or_repr(sol.lambda_star),
            "bq_size_at_star": sol.bq_size_at_star,
            "feasibility_prob": sol.feasibility_prob,
            "fallback_used": sol.fallback_used,
            "bq_monotone": sol.bq_monotone,
            "candidate_table": [
                {k: _finite_or_repr(v) for k, v in row.as_dict().items()}
                for row in sol.candidate_table
            ],
            "diagnostics": sol.diagnostics,
        },
        sort_keys=True,
    )
