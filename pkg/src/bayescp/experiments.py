"""Multi-split evaluation harness for the regression and classification benchmarks.

Each split derives its own seeds from (master seed, split index), so any
single split can be rerun in isolation and reproduce its record exactly.
Timing fields are wall-clock measurements and are excluded from all
determinism guarantees.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from time import perf_counter

import numpy as np
import scipy

from . import __version__
from .baselines import bci_classification_set, bci_regression_interval, lasso_fit, lasso_predict
from .conformal import (
    RiskConfig,
    cal_likelihoods,
    cb_candidate_ranks,
    conformal_rank,
    split_threshold,
)
from .datasets import (
    Dataset,
    apply_standardizer,
    builtin_dataset,
    fit_standardizer,
    label_grid,
    load_csv,
    make_split,
)
from .optimizer import bcp_calibrate, reselect_beta
from .posterior import (
    McmcConfig,
    PosteriorDraws,
    PriorConfigLogistic,
    PriorConfigRegression,
    linear_predictor,
    loglik_from_predictor,
    regression_params,
    sample_blogistic,
    sample_blr,
)
from .scores import compute_cal_scores, compute_test_scores, predictive_logdensity

REGRESSION_METHODS = ("split_cp", "bci", "cb", "bcp")
CLASSIFICATION_METHODS = ("split_cp", "bci", "cb", "bcp", "msp")
LASSO_PENALTY = 0.004

PROFILES = {
    "desk": {"n_splits": 10, "total_iters": 2000, "burn_in": 500},
    "paper": {"n_splits": 50, "total_iters": 8000, "burn_in": 2000},
}


@dataclass
class ExperimentConfig:
    data: str = "diabetes"  # builtin name or CSV path
    task_kind: str = "regression"
    methods: tuple[str, ...] = REGRESSION_METHODS
    n_splits: int = 10
    ratios: tuple[float, float, float] = (0.525, 0.175, 0.30)
    alpha: float = 0.2
    beta: float = 0.6
    betas: tuple[float, ...] = ()
    prior_c: float = 1.0
    weight_sd: float = 1.0
    total_iters: int = 2000
    burn_in: int = 500
    grid_size: int = 100
    # Threshold-candidate count: None resolves per task (20 for regression,
    # 30 for classification) to track each benchmark's calibration-set size.
    n_candidates: int | None = None
    dirichlet_draws: int = 2000
    m_per_draw: int = 1
    seed: int = 0
    hpd: bool = False
    asymmetric_scores: bool = False
    use_mc: bool = False

    def __post_init__(self):
        if self.n_splits < 1:
            raise ValueError("n_splits must be at least 1")
        if not self.methods:
            raise ValueError("methods must be non-empty")
        allowed = CLASSIFICATION_METHODS if self.task_kind == "classification" else REGRESSION_METHODS
        unknown = set(self.methods) - set(allowed)
        if unknown:
            raise ValueError(f"unknown methods for {self.task_kind}: {sorted(unknown)}")
        if self.n_candidates is None:
            self.n_candidates = 20 if self.task_kind == "regression" else 30


@dataclass
class MethodSummary:
    method: str
    setting: dict
    coverage_mean: float
    coverage_sd: float
    size_mean: float
    size_sd: float
    pred_time_mean: float
    calib_time_mean: float
    fallback_count: int
    per_split: list[dict] = field(repr=False, default_factory=list)


@dataclass
class MetricsSummary:
    task_kind: str
    config: dict
    methods: list[MethodSummary]
    seeds: dict
    versions: dict
    extras: dict = field(default_factory=dict)


def apply_profile(config: ExperimentConfig, profile: str) -> ExperimentConfig:
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    values = asdict(config)
    values.update(PROFILES[profile])
    values["methods"] = tuple(values["methods"])
    values["ratios"] = tuple(values["ratios"])
    values["betas"] = tuple(values["betas"])
    return ExperimentConfig(**values)


def derive_seeds(master_seed: int, split_index: int) -> dict:
    """Deterministic per-split seeds for every randomness consumer."""
    words = np.random.SeedSequence([master_seed, split_index]).generate_state(4)
    return {
        "split": int(words[0]),
        "mcmc": int(words[1]),
        "dirichlet": int(words[2]),
        "bci": int(words[3]),
    }


def _load(config: ExperimentConfig) -> Dataset:
    try:
        return builtin_dataset(config.data)
    except KeyError:
        return load_csv(config.data, config.task_kind)


def _versions() -> dict:
    return {"bayescp": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def _mean_sd(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def _set_sizes_at(test_scores: np.ndarray, grid: np.ndarray, lam: float, task_kind: str) -> np.ndarray:
    counts = np.sum(test_scores <= lam, axis=1).astype(float)
    if task_kind == "regression":
        spacing = float(grid[1] - grid[0])
        return np.maximum(counts - 1.0, 0.0) * spacing
    return counts


@dataclass
class _SplitContext:
    """Standardized per-split data plus the fitted posterior (if needed)."""

    split_index: int
    seeds: dict
    X_tr: np.ndarray
    y_tr: np.ndarray
    X_cal: np.ndarray
    y_cal: np.ndarray
    X_te: np.ndarray
    y_te: np.ndarray
    grid: np.ndarray
    draws: PosteriorDraws | None
    mcmc_time: float
    cache: dict = field(default_factory=dict)


def _prepare_split(config: ExperimentConfig, dataset: Dataset, split_index: int) -> _SplitContext:
    seeds = derive_seeds(config.seed, split_index)
    split = make_split(dataset.n, config.ratios, seeds["split"])
    std = fit_standardizer(dataset, split.train_idx)
    data = apply_standardizer(std, dataset)
    X, y = data.features, data.labels
    X_tr, y_tr = X[split.train_idx], y[split.train_idx]
    grid = (
        label_grid(y_tr, config.grid_size)
        if config.task_kind == "regression"
        else np.array([0.0, 1.0])
    )

    draws = None
    mcmc_time = 0.0
    if any(m in config.methods for m in ("bci", "cb", "bcp", "msp")):
        mcmc = McmcConfig(
            total_iters=config.total_iters, burn_in=config.burn_in, seed=seeds["mcmc"]
        )
        t0 = perf_counter()
        if config.task_kind == "regression":
            draws = sample_blr(X_tr, y_tr, PriorConfigRegression(c=config.prior_c), mcmc)
        else:
            draws = sample_blogistic(X_tr, y_tr, PriorConfigLogistic(config.weight_sd), mcmc)
        mcmc_time = perf_counter() - t0

    return _SplitContext(
        split_index=split_index,
        seeds=seeds,
        X_tr=X_tr,
        y_tr=y_tr,
        X_cal=X[split.cal_idx],
        y_cal=y[split.cal_idx],
        X_te=X[split.test_idx],
        y_te=y[split.test_idx],
        grid=grid,
        draws=draws,
        mcmc_time=mcmc_time,
    )


def _eval_split_cp(ctx: _SplitContext, config: ExperimentConfig) -> dict:
    n_te = len(ctx.y_te)
    if config.task_kind == "regression":
        t0 = perf_counter()
        model = lasso_fit(ctx.X_tr, ctx.y_tr, LASSO_PENALTY)
        scores = np.abs(ctx.y_cal - lasso_predict(model, ctx.X_cal))
        thr = split_threshold(scores, config.alpha)
        calib_time = perf_counter() - t0
        t0 = perf_counter()
        preds = lasso_predict(model, ctx.X_te)
        covered = np.abs(ctx.y_te - preds) <= thr.value
        sizes = np.full(n_te, 2.0 * thr.value)
        pred_time = (perf_counter() - t0) / n_te
    else:
        t0 = perf_counter()
        cal_scores = compute_cal_scores(ctx.draws, ctx.X_cal, ctx.y_cal, "mean_neglog")
        thr = split_threshold(cal_scores, config.alpha)
        calib_time = perf_counter() - t0
        t0 = perf_counter()
        sm = compute_test_scores(ctx.draws, ctx.X_te, ctx.grid, "mean_neglog")
        true_scores = compute_cal_scores(ctx.draws, ctx.X_te, ctx.y_te, "mean_neglog")
        covered = true_scores <= thr.value
        sizes = _set_sizes_at(sm.test_scores, ctx.grid, thr.value, config.task_kind)
        pred_time = (perf_counter() - t0) / n_te
    return {
        "coverage": float(np.mean(covered)),
        "size": float(np.mean(sizes)),
        "pred_time": pred_time,
        "calib_time": calib_time,
        "lambda": thr.value if np.isfinite(thr.value) else None,
    }


def _eval_bci(ctx: _SplitContext, config: ExperimentConfig) -> dict:
    n_te = len(ctx.y_te)
    t0 = perf_counter()
    covered = np.zeros(n_te, dtype=bool)
    sizes = np.zeros(n_te)
    if config.task_kind == "regression":
        for i in range(n_te):
            iv = bci_regression_interval(
                ctx.draws,
                ctx.X_te[i],
                config.alpha,
                m_per_draw=config.m_per_draw,
                seed=ctx.seeds["bci"] + i,
                hpd=config.hpd,
            )
            covered[i] = iv.contains(ctx.y_te[i])
            sizes[i] = iv.width
    else:
        mu = linear_predictor(ctx.draws, ctx.X_te)
        p1 = 1.0 / (1.0 + np.exp(-mu))
        p1_mean = p1.mean(axis=1)
        for i in range(n_te):
            labels = bci_classification_set(float(p1_mean[i]), config.alpha)
            covered[i] = ctx.y_te[i] in labels
            sizes[i] = len(labels)
    pred_time = (perf_counter() - t0) / n_te
    return {
        "coverage": float(np.mean(covered)),
        "size": float(np.mean(sizes)),
        "pred_time": pred_time,
        "calib_time": 0.0,
    }


def _eval_cb(ctx: _SplitContext, config: ExperimentConfig) -> dict:
    n_te = len(ctx.y_te)
    t0 = perf_counter()
    cal_like = cal_likelihoods(ctx.draws, ctx.X_cal, ctx.y_cal)
    calib_time = perf_counter() - t0
    k = conformal_rank(len(ctx.y_cal), config.alpha)

    t0 = perf_counter()
    covered = np.zeros(n_te, dtype=bool)
    sizes = np.zeros(n_te)
    spacing = float(ctx.grid[1] - ctx.grid[0]) if config.task_kind == "regression" else None
    for i in range(n_te):
        if config.task_kind == "regression":
            cands = np.append(ctx.grid, ctx.y_te[i])  # last candidate scores the truth
        else:
            cands = ctx.grid
        ranks = cb_candidate_ranks(ctx.draws, cal_like, ctx.X_te[i], cands)
        in_set = ranks <= k
        if config.task_kind == "regression":
            covered[i] = in_set[-1]
            count = int(np.sum(in_set[:-1]))
            sizes[i] = max(count - 1, 0) * spacing
        else:
            covered[i] = in_set[int(ctx.y_te[i])]
            sizes[i] = int(np.sum(in_set))
    pred_time = (perf_counter() - t0) / n_te
    return {
        "coverage": float(np.mean(covered)),
        "size": float(np.mean(sizes)),
        "pred_time": pred_time,
        "calib_time": calib_time,
    }


def _eval_bcp(ctx: _SplitContext, config: ExperimentConfig, beta: float, keep_table: bool) -> dict:
    cache = ctx.cache
    if "bcp_sol_base" not in cache:
        t0 = perf_counter()
        risk = RiskConfig(
            alpha=config.alpha,
            beta=beta,
            dirichlet_draws=config.dirichlet_draws,
            seed=ctx.seeds["dirichlet"],
        )
        cache["bcp_sol_base"] = bcp_calibrate(
            ctx.draws,
            ctx.X_cal,
            ctx.y_cal,
            ctx.grid,
            risk,
            n_candidates=config.n_candidates,
            use_mc=config.use_mc,
            asymmetric=config.asymmetric_scores,
        )
        cache["bcp_calib_time"] = perf_counter() - t0
        cache["bcp_base_beta"] = beta
    if beta == cache["bcp_base_beta"]:
        sol = cache["bcp_sol_base"]
        calib_time = cache["bcp_calib_time"]
    else:
        # The candidate table is beta-independent under common random
        # numbers; a new beta only needs re-selection.
        t0 = perf_counter()
        sol = reselect_beta(cache["bcp_sol_base"], beta)
        calib_time = cache["bcp_calib_time"] + (perf_counter() - t0)

    if "bcp_test_scores" not in cache:
        t0 = perf_counter()
        sm = compute_test_scores(ctx.draws, ctx.X_te, ctx.grid, "aoi_neglog")
        cache["bcp_test_scores"] = sm.test_scores
        cache["bcp_true_scores"] = compute_cal_scores(ctx.draws, ctx.X_te, ctx.y_te, "aoi_neglog")
        cache["bcp_score_time"] = perf_counter() - t0

    n_te = len(ctx.y_te)
    t0 = perf_counter()
    covered = cache["bcp_true_scores"] <= sol.lambda_star
    sizes = _set_sizes_at(cache["bcp_test_scores"], ctx.grid, sol.lambda_star, config.task_kind)
    pred_time = (cache["bcp_score_time"] + perf_counter() - t0) / n_te

    record = {
        "coverage": float(np.mean(covered)),
        "size": float(np.mean(sizes)),
        "pred_time": pred_time,
        "calib_time": calib_time,
        "lambda": sol.lambda_star if np.isfinite(sol.lambda_star) else None,
        "fallback": sol.fallback_used,
        "feasibility_prob": sol.feasibility_prob,
        "bq_monotone": sol.bq_monotone,
    }
    if keep_table:
        record["candidate_table"] = [row.as_dict() for row in sol.candidate_table]
    return record


def _eval_msp(ctx: _SplitContext, config: ExperimentConfig) -> dict:
    # Top-1 label by posterior-predictive mean; reported as a singleton set.
    n_te = len(ctx.y_te)
    t0 = perf_counter()
    mu = linear_predictor(ctx.draws, ctx.X_te)
    p1 = (1.0 / (1.0 + np.exp(-mu))).mean(axis=1)
    top = (p1 >= 0.5).astype(float)
    covered = top == ctx.y_te
    pred_time = (perf_counter() - t0) / n_te
    return {
        "coverage": float(np.mean(covered)),
        "size": 1.0,
        "pred_time": pred_time,
        "calib_time": 0.0,
    }


def run_split(config: ExperimentConfig, dataset: Dataset, split_index: int) -> dict:
    """Evaluate every configured method on one split; reproducible in isolation."""
    ctx = _prepare_split(config, dataset, split_index)
    record: dict = {
        "split": split_index,
        "seeds": ctx.seeds,
        "mcmc_time": ctx.mcmc_time,
    }
    if ctx.draws is not None:
        record["acceptance_rate"] = ctx.draws.acceptance_rate
    for method in config.methods:
        if method == "split_cp":
            record[method] = _eval_split_cp(ctx, config)
        elif method == "bci":
            record[method] = _eval_bci(ctx, config)
        elif method == "cb":
            record[method] = _eval_cb(ctx, config)
        elif method == "bcp":
            record[method] = _eval_bcp(ctx, config, config.beta, keep_table=split_index == 0)
        elif method == "msp":
            record[method] = _eval_msp(ctx, config)
    return record


def _aggregate(config: ExperimentConfig, records: list[dict], setting: dict) -> list[MethodSummary]:
    summaries = []
    for method in config.methods:
        rows = [r[method] for r in records]
        cov_mean, cov_sd = _mean_sd([r["coverage"] for r in rows])
        size_mean, size_sd = _mean_sd([r["size"] for r in rows])
        summaries.append(
            MethodSummary(
                method=method,
                setting=dict(setting),
                coverage_mean=cov_mean,
                coverage_sd=cov_sd,
                size_mean=size_mean,
                size_sd=size_sd,
                pred_time_mean=float(np.mean([r["pred_time"] for r in rows])),
                calib_time_mean=float(np.mean([r["calib_time"] for r in rows])),
                fallback_count=int(sum(bool(r.get("fallback")) for r in rows)),
                per_split=[
                    {"split": rec["split"], "seeds": rec["seeds"], **row}
                    for rec, row in zip(records, rows)
                ],
            )
        )
    return summaries


def _run(config: ExperimentConfig, setting: dict) -> MetricsSummary:
    dataset = _load(config)
    records = []
    for i in range(config.n_splits):
        try:
            records.append(run_split(config, dataset, i))
        except Exception as exc:
            seeds = derive_seeds(config.seed, i)
            raise RuntimeError(f"split {i} failed (seeds {seeds}): {exc}") from exc
    extras = {}
    for rec in records:
        if "bcp" in rec and "candidate_table" in rec["bcp"]:
            extras["candidate_table"] = rec["bcp"]["candidate_table"]
            extras["alpha"] = config.alpha
            extras["beta"] = config.beta
            break
    return MetricsSummary(
        task_kind=config.task_kind,
        config=asdict(config),
        methods=_aggregate(config, records, setting),
        seeds={"master": config.seed},
        versions=_versions(),
        extras=extras,
    )


def run_regression_experiment(config: ExperimentConfig) -> MetricsSummary:
    if config.task_kind != "regression":
        raise ValueError("config.task_kind must be 'regression'")
    return _run(config, {"c": config.prior_c})


def run_classification_experiment(config: ExperimentConfig) -> MetricsSummary:
    if config.task_kind != "classification":
        raise ValueError("config.task_kind must be 'classification'")
    return _run(config, {})


def beta_scan(config: ExperimentConfig) -> MetricsSummary:
    """Re-calibrate the risk-controlled method across a list of beta values.

    Posterior draws and all scores are computed once per split; only the L+
    feasibility decision and the resulting threshold change with beta, under
    common random numbers. Produces one summary row per beta.
    """
    if config.task_kind != "regression":
        raise ValueError("beta_scan expects a regression config")
    if not config.betas:
        raise ValueError("config.betas must be non-empty")
    dataset = _load(config)
    scan_config = ExperimentConfig(**{**asdict(config), "methods": ("bcp",)})

    per_beta_rows: dict[float, list[dict]] = {b: [] for b in config.betas}
    records_meta = []
    for i in range(scan_config.n_splits):
        try:
            ctx = _prepare_split(scan_config, dataset, i)
            for b in config.betas:
                row = _eval_bcp(ctx, scan_config, b, keep_table=False)
                per_beta_rows[b].append(row)
        except Exception as exc:
            seeds = derive_seeds(config.seed, i)
            raise RuntimeError(f"split {i} failed (seeds {seeds}): {exc}") from exc
        records_meta.append({"split": i, "seeds": derive_seeds(config.seed, i)})

    summaries = []
    for b in config.betas:
        rows = per_beta_rows[b]
        cov_mean, cov_sd = _mean_sd([r["coverage"] for r in rows])
        size_mean, size_sd = _mean_sd([r["size"] for r in rows])
        miscoverage = 1.0 - cov_mean
        summaries.append(
            MethodSummary(
                method="bcp",
                setting={"beta": b, "miscoverage": miscoverage, "gap": config.alpha - miscoverage},
                coverage_mean=cov_mean,
                coverage_sd=cov_sd,
                size_mean=size_mean,
                size_sd=size_sd,
                pred_time_mean=float(np.mean([r["pred_time"] for r in rows])),
                calib_time_mean=float(np.mean([r["calib_time"] for r in rows])),
                fallback_count=int(sum(bool(r.get("fallback")) for r in rows)),
                per_split=[
                    {"split": meta["split"], "seeds": meta["seeds"], **row}
                    for meta, row in zip(records_meta, rows)
                ],
            )
        )
    return MetricsSummary(
        task_kind=config.task_kind,
        config=asdict(config),
        methods=summaries,
        seeds={"master": config.seed},
        versions=_versions(),
        extras={"scan": "beta", "alpha": config.alpha},
    )


def posterior_avg_risk(
    draws: PosteriorDraws,
    lam: float,
    eval_inputs: np.ndarray,
    samples_per_draw: int = 1,
    seed: int = 0,
    score_kind: str = "aoi_neglog",
    chunk: int = 512,
) -> float:
    """Monte-Carlo posterior-averaged miscoverage risk at a threshold.

    Samples theta from the draws, inputs from the empirical measure over
    ``eval_inputs``, outcomes from the model, and reports the fraction whose
    score exceeds ``lam``. Diagnostic only; the coverage guarantee comes from
    the L+ constraint, not from this quantity.
    """
    eval_inputs = np.atleast_2d(np.asarray(eval_inputs, dtype=float))
    rng = np.random.default_rng(seed)
    T = draws.n_draws
    idx = rng.integers(0, len(eval_inputs), size=(T, samples_per_draw))
    X_pairs = eval_inputs[idx.ravel()]

    if draws.model_kind == "sparse_linear":
        theta, theta0, tau = regression_params(draws)
        mu_own = np.einsum("td,tsd->ts", theta, eval_inputs[idx]) + theta0[:, None]
        y_pairs = rng.normal(mu_own, tau[:, None]).ravel()
    else:
        wmat, w0 = draws.draws[:, :-1], draws.draws[:, -1]
        z = np.einsum("td,tsd->ts", wmat, eval_inputs[idx]) + w0[:, None]
        p = 1.0 / (1.0 + np.exp(-z))
        y_pairs = (rng.random(p.shape) < p).astype(float).ravel()

    exceed = 0
    lam = float(lam)
    for start in range(0, len(y_pairs), chunk):
        Xc = X_pairs[start : start + chunk]
        yc = y_pairs[start : start + chunk]
        mu = linear_predictor(draws, Xc)
        ll = loglik_from_predictor(draws, mu, yc)
        scores = -predictive_logdensity(ll, score_kind)
        exceed += int(np.sum(scores > lam))
    return exceed / len(y_pairs)
