"""MCMC posterior sampling for the two Bayesian models used throughout.

Both samplers are component-wise random-walk Metropolis chains whose step
sizes adapt toward a 0.44 acceptance rate during burn-in and are frozen
afterwards, so the kept chain uses a fixed kernel. Positive parameters are
sampled on the log scale with the Jacobian correction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Per-draw densities are clamped below at this level before logs, keeping
# every downstream score finite.
DENSITY_FLOOR = 1e-300
LOG_DENSITY_FLOOR = math.log(DENSITY_FLOOR)

_LOG_2PI = math.log(2.0 * math.pi)
_TARGET_ACCEPT = 0.44
_LOG_STEP_BOUND = 20.0


@dataclass(frozen=True)
class PriorConfigRegression:
    """Hierarchical prior for the sparse linear model.

    Weights get Laplace(0, b) with b ~ Gamma(shape, rate) and the noise sd
    gets a half-normal prior of scale ``c``; the intercept is flat.
    """

    c: float = 1.0
    laplace_rate_shape: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("prior scale c must be positive")


@dataclass(frozen=True)
class PriorConfigLogistic:
    weight_sd: float = 1.0

    def __post_init__(self):
        if self.weight_sd <= 0:
            raise ValueError("weight_sd must be positive")


@dataclass(frozen=True)
class McmcConfig:
    total_iters: int = 8000
    burn_in: int = 2000
    initial_step: float = 0.2
    adapt_window: int = 50
    seed: int = 0
    thin: int = 1

    def __post_init__(self):
        if self.burn_in >= self.total_iters:
            raise ValueError("burn_in must be smaller than total_iters")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")
        if self.adapt_window < 1 or self.thin < 1:
            raise ValueError("adapt_window and thin must be at least 1")


@dataclass
class PosteriorDraws:
    """Kept MCMC draws, one parameter vector per row."""

    draws: np.ndarray  # (T_kept, p)
    param_names: tuple[str, ...]
    model_kind: str  # "sparse_linear" | "logistic"
    acceptance_rate: float
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.draws).all():
            raise ValueError("posterior draws contain non-finite entries")
        if self.model_kind == "sparse_linear":
            if np.any(self.draws[:, -1] <= 0):
                raise ValueError("tau draws must be strictly positive")
        elif self.model_kind != "logistic":
            raise ValueError(f"unknown model_kind {self.model_kind!r}")

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def n_features(self) -> int:
        off = 3 if self.model_kind == "sparse_linear" else 1
        return self.draws.shape[1] - off


def _adapt_steps(log_steps, accepts, window):
    rates = accepts / window
    log_steps += rates - _TARGET_ACCEPT
    np.clip(log_steps, -_LOG_STEP_BOUND, _LOG_STEP_BOUND, out=log_steps)
    accepts[:] = 0.0


def sample_blr(
    X: np.ndarray,
    y: np.ndarray,
    prior: PriorConfigRegression,
    mcmc: McmcConfig,
    *,
    gaussian_prior_sd: float | None = None,
    fix_tau: float | None = None,
) -> PosteriorDraws:
    """Sample the sparse Bayesian linear regression posterior.

    Parameter vector: (theta_1..theta_d, theta0, b, tau). With ``X`` empty
    the chain targets the prior alone (used by the moment-matching checks).

    The two keyword switches exist for oracle tests: ``gaussian_prior_sd``
    replaces the Laplace prior on weights by Normal(0, sd^2) and freezes b;
    ``fix_tau`` pins the noise sd so the conjugate posterior is available in
    closed form.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    n, d = X.shape
    if y.shape != (n,):
        raise ValueError("y length must match X rows")
    shape_b, rate_b = prior.laplace_rate_shape

    theta = np.zeros(d)
    theta0 = 0.0
    lb = 0.0  # log b
    lt = 0.0 if fix_tau is None else math.log(fix_tau)

    eta = X @ theta + theta0
    rss = float(np.sum((y - eta) ** 2))

    def log_prior_theta(th, b):
        if gaussian_prior_sd is not None:
            return -0.5 * float(np.sum(th**2)) / gaussian_prior_sd**2
        return -d * math.log(2.0 * b) - float(np.sum(np.abs(th))) / b

    def logpost_parts(th_abs_sum, th_sq_sum, rss_, lb_, lt_):
        b, tau = math.exp(lb_), math.exp(lt_)
        ll = -n * lt_ - 0.5 * rss_ / tau**2
        if gaussian_prior_sd is not None:
            lp_th = -0.5 * th_sq_sum / gaussian_prior_sd**2
        else:
            lp_th = -d * math.log(2.0 * b) - th_abs_sum / b
        lp_b = shape_b * lb_ - rate_b * b  # Gamma density + Jacobian
        lp_tau = -0.5 * tau**2 / prior.c**2 + lt_  # half-normal + Jacobian
        return ll + lp_th + lp_b + lp_tau

    cur = logpost_parts(float(np.sum(np.abs(theta))), float(np.sum(theta**2)), rss, lb, lt)
    if not np.isfinite(cur):
        raise ValueError("non-finite log-posterior at initialization")

    sample_b = gaussian_prior_sd is None
    sample_tau = fix_tau is None
    blocks = d + 1 + int(sample_b) + int(sample_tau)
    log_steps = np.full(blocks, math.log(mcmc.initial_step))
    accepts = np.zeros(blocks)
    post_accepts = 0
    post_proposals = 0
    step_history = []

    rng = np.random.default_rng(mcmc.seed)
    kept = []
    for it in range(mcmc.total_iters):
        adapting = it < mcmc.burn_in
        z = rng.standard_normal(blocks)
        u = np.log(rng.random(blocks))
        steps = np.exp(log_steps)
        blk = 0

        b, tau = math.exp(lb), math.exp(lt)
        inv2t2 = 0.5 / tau**2
        for j in range(d):
            prop = theta[j] + steps[blk] * z[blk]
            if n:
                delta_eta = (prop - theta[j]) * X[:, j]
                new_rss = float(np.sum((y - eta - delta_eta) ** 2))
            else:
                new_rss = rss
            if gaussian_prior_sd is not None:
                dprior = -0.5 * (prop**2 - theta[j] ** 2) / gaussian_prior_sd**2
            else:
                dprior = -(abs(prop) - abs(theta[j])) / b
            delta = -(new_rss - rss) * inv2t2 + dprior
            if delta > u[blk]:
                if n:
                    eta = eta + delta_eta
                theta[j] = prop
                rss = new_rss
                accepts[blk] += adapting
                post_accepts += not adapting
            blk += 1

        prop = theta0 + steps[blk] * z[blk]
        if n:
            new_rss = float(np.sum((y - eta - (prop - theta0)) ** 2))
        else:
            new_rss = rss
        if -(new_rss - rss) * inv2t2 > u[blk]:  # flat prior on the intercept
            if n:
                eta = eta + (prop - theta0)
            theta0 = prop
            rss = new_rss
            accepts[blk] += adapting
            post_accepts += not adapting
        blk += 1

        if sample_b:
            prop = lb + steps[blk] * z[blk]
            bp = math.exp(prop)
            abs_sum = float(np.sum(np.abs(theta)))
            delta = (
                -d * (math.log(2 * bp) - math.log(2 * b))
                - abs_sum * (1 / bp - 1 / b)
                + shape_b * (prop - lb)
                - rate_b * (bp - b)
            )
            if delta > u[blk]:
                lb = prop
                accepts[blk] += adapting
                post_accepts += not adapting
            blk += 1

        if sample_tau:
            prop = lt + steps[blk] * z[blk]
            taup = math.exp(prop)
            delta = (
                -n * (prop - lt)
                - 0.5 * rss * (1 / taup**2 - 1 / tau**2)
                - 0.5 * (taup**2 - tau**2) / prior.c**2
                + (prop - lt)
            )
            if delta > u[blk]:
                lt = prop
                accepts[blk] += adapting
                post_accepts += not adapting
            blk += 1

        if not adapting:
            post_proposals += blocks
        if adapting and (it + 1) % mcmc.adapt_window == 0:
            _adapt_steps(log_steps, accepts, mcmc.adapt_window)
            step_history.append(np.exp(log_steps).copy())
        if it >= mcmc.burn_in and (it - mcmc.burn_in) % mcmc.thin == 0:
            kept.append(np.concatenate([theta, [theta0, math.exp(lb), math.exp(lt)]]))

    names = tuple(f"theta_{j}" for j in range(d)) + ("theta0", "b", "tau")
    return PosteriorDraws(
        draws=np.asarray(kept),
        param_names=names,
        model_kind="sparse_linear",
        acceptance_rate=post_accepts / max(post_proposals, 1),
        diagnostics={
            "final_steps": np.exp(log_steps).tolist(),
            "step_history": [s.tolist() for s in step_history],
            "seed": mcmc.seed,
            "total_iters": mcmc.total_iters,
            "burn_in": mcmc.burn_in,
        },
    )


def sample_blogistic(
    X: np.ndarray, y: np.ndarray, prior: PriorConfigLogistic, mcmc: McmcConfig
) -> PosteriorDraws:
    """Sample the Bayesian logistic regression posterior.

    Parameter vector: (w_1..w_d, w0) with independent Normal(0, weight_sd^2)
    priors on every component including the intercept.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be 2-dimensional")
    n, d = X.shape
    if y.shape != (n,):
        raise ValueError("y length must match X rows")
    if n and not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must lie in {0, 1}")

    sign = 2.0 * y - 1.0  # +1 for label 1, -1 for label 0
    w = np.zeros(d + 1)  # last entry is the intercept
    eta = X @ w[:d] + w[d] if n else np.zeros(0)

    def loglik(e):
        # sum_i log sigmoid(sign_i * eta_i), numerically stable
        return -float(np.sum(np.logaddexp(0.0, -sign * e))) if n else 0.0

    cur_ll = loglik(eta)
    if not np.isfinite(cur_ll):
        raise ValueError("non-finite log-posterior at initialization")
    inv2s2 = 0.5 / prior.weight_sd**2

    blocks = d + 1
    log_steps = np.full(blocks, math.log(mcmc.initial_step))
    accepts = np.zeros(blocks)
    post_accepts = 0
    post_proposals = 0
    step_history = []

    rng = np.random.default_rng(mcmc.seed)
    kept = []
    for it in range(mcmc.total_iters):
        adapting = it < mcmc.burn_in
        z = rng.standard_normal(blocks)
        u = np.log(rng.random(blocks))
        steps = np.exp(log_steps)
        for j in range(blocks):
            prop = w[j] + steps[j] * z[j]
            if n:
                new_eta = eta + (prop - w[j]) * (X[:, j] if j < d else 1.0)
                new_ll = loglik(new_eta)
            else:
                new_eta, new_ll = eta, cur_ll
            delta = new_ll - cur_ll - inv2s2 * (prop**2 - w[j] ** 2)
            if delta > u[j]:
                w[j] = prop
                eta, cur_ll = new_eta, new_ll
                accepts[j] += adapting
                post_accepts += not adapting
        if not adapting:
            post_proposals += blocks
        if adapting and (it + 1) % mcmc.adapt_window == 0:
            _adapt_steps(log_steps, accepts, mcmc.adapt_window)
            step_history.append(np.exp(log_steps).copy())
        if it >= mcmc.burn_in and (it - mcmc.burn_in) % mcmc.thin == 0:
            kept.append(w.copy())

    names = tuple(f"w_{j}" for j in range(d)) + ("w0",)
    return PosteriorDraws(
        draws=np.asarray(kept),
        param_names=names,
        model_kind="logistic",
        acceptance_rate=post_accepts / max(post_proposals, 1),
        diagnostics={
            "final_steps": np.exp(log_steps).tolist(),
            "step_history": [s.tolist() for s in step_history],
            "seed": mcmc.seed,
            "total_iters": mcmc.total_iters,
            "burn_in": mcmc.burn_in,
        },
    )


def regression_params(draws: PosteriorDraws):
    """Split sparse-linear draws into (theta, theta0, tau) views."""
    if draws.model_kind != "sparse_linear":
        raise ValueError("regression draws required")
    d = draws.n_features
    return draws.draws[:, :d], draws.draws[:, d], draws.draws[:, d + 2]


def logistic_params(draws: PosteriorDraws):
    if draws.model_kind != "logistic":
        raise ValueError("logistic draws required")
    d = draws.n_features
    return draws.draws[:, :d], draws.draws[:, d]


def linear_predictor(draws: PosteriorDraws, X: np.ndarray) -> np.ndarray:
    """Per-draw linear predictor matrix of shape (n, T)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != draws.n_features:
        raise ValueError(
            f"feature dimension mismatch: got {X.shape[1]}, model has {draws.n_features}"
        )
    if draws.model_kind == "sparse_linear":
        theta, theta0, _ = regression_params(draws)
        return X @ theta.T + theta0
    wmat, w0 = logistic_params(draws)
    return X @ wmat.T + w0


def loglik_from_predictor(draws: PosteriorDraws, mu: np.ndarray, y) -> np.ndarray:
    """Per-draw log density log f_theta(y | x) given the predictor matrix.

    ``y`` may be a scalar candidate label (broadcast over rows) or a vector
    paired with the rows of ``mu``. Values are clamped at the density floor.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if draws.model_kind == "sparse_linear":
        tau = regression_params(draws)[2]
        z = (y - mu) / tau
        ll = -0.5 * z**2 - np.log(tau) - 0.5 * _LOG_2PI
    else:
        sign = 2.0 * y - 1.0
        ll = -np.logaddexp(0.0, -sign * mu)
    return np.maximum(ll, LOG_DENSITY_FLOOR)


def loglik_per_draw(draws: PosteriorDraws, x: np.ndarray, y: float) -> np.ndarray:
    """log f_theta(y | x) for every kept draw; always finite."""
    mu = linear_predictor(draws, x)
    return loglik_from_predictor(draws, mu, float(y))[0]


def predictive_samples(
    draws: PosteriorDraws, x: np.ndarray, m_per_draw: int, seed: int
) -> np.ndarray:
    """Draw y ~ Normal(theta^T x + theta0, tau^2), m per posterior draw."""
    if draws.model_kind != "sparse_linear":
        raise ValueError("predictive_samples requires regression draws")
    if m_per_draw < 1:
        raise ValueError("m_per_draw must be at least 1")
    mu = linear_predictor(draws, x)[0]
    tau = regression_params(draws)[2]
    rng = np.random.default_rng(seed)
    out = rng.normal(mu[:, None], tau[:, None], size=(draws.n_draws, m_per_draw))
    return out.ravel()


def save_draws(draws: PosteriorDraws, prefix: str | Path) -> tuple[Path, Path]:
    """Write draws as a CSV matrix plus a JSON sidecar, returning both paths."""
    prefix = Path(prefix)
    csv_path = prefix.with_suffix(".csv")
    json_path = prefix.with_suffix(".json")
    np.savetxt(csv_path, draws.draws, delimiter=",", header=",".join(draws.param_names))
    json_path.write_text(
        json.dumps(
            {
                "param_names": list(draws.param_names),
                "model_kind": draws.model_kind,
                "acceptance_rate": draws.acceptance_rate,
                "diagnostics": {
                    k: v for k, v in draws.diagnostics.items() if k != "step_history"
                },
            },
            sort_keys=True,
            indent=2,
        )
    )
    return csv_path, json_path


def load_draws(prefix: str | Path) -> PosteriorDraws:
    prefix = Path(prefix)
    mat = np.loadtxt(prefix.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    meta = json.loads(prefix.with_suffix(".json").read_text())
    return PosteriorDraws(
        draws=mat,
        param_names=tuple(meta["param_names"]),
        model_kind=meta["model_kind"],
        acceptance_rate=meta["acceptance_rate"],
        diagnostics=meta.get("diagnostics", {}),
    )
