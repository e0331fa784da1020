"""Bayesian conformal prediction with risk-controlled threshold optimisation.

Prediction sets threshold a posterior-predictive non-conformity score; the
threshold is chosen to minimise the quadrature-estimated expected set size
subject to a Dirichlet-based risk bound holding with the requested
confidence. Classical split conformal prediction, Bayesian credible sets,
and full-conformal reweighting baselines ship alongside, together with a
multi-split benchmark harness and CLI.
"""

__version__ = "0.1.0"

from .conformal import (
    PredictionSet,
    RiskConfig,
    Threshold,
    build_set,
    cb_full_conformal,
    crc_feasible,
    lplus_draws,
    miscoverage_losses,
    split_threshold,
)
from .datasets import (
    Dataset,
    SplitSpec,
    Standardizer,
    apply_standardizer,
    builtin_dataset,
    fit_standardizer,
    label_grid,
    load_csv,
    make_split,
    synthetic_regression,
)
from .optimizer import BcpSolution, bcp_calibrate, select_lambda
from .posterior import (
    McmcConfig,
    PosteriorDraws,
    PriorConfigLogistic,
    PriorConfigRegression,
    loglik_per_draw,
    predictive_samples,
    sample_blogistic,
    sample_blr,
)
from .quadrature import (
    BqEstimate,
    KernelConfig,
    SizeCurve,
    bq_expected_size,
    candidate_grid,
    mc_expected_size,
    set_size_per_input,
)
from .scores import (
    ScoreMatrix,
    aoi_predictive,
    aoi_weights,
    compute_cal_scores,
    compute_test_scores,
    mean_predictive,
    neglog_score,
)

__all__ = [
    "__version__",
    "BcpSolution",
    "BqEstimate",
    "Dataset",
    "KernelConfig",
    "McmcConfig",
    "PosteriorDraws",
    "PredictionSet",
    "PriorConfigLogistic",
    "PriorConfigRegression",
    "RiskConfig",
    "ScoreMatrix",
    "SizeCurve",
    "SplitSpec",
    "Standardizer",
    "Threshold",
    "aoi_predictive",
    "aoi_weights",
    "apply_standardizer",
    "bcp_calibrate",
    "bq_expected_size",
    "build_set",
    "builtin_dataset",
    "candidate_grid",
    "cb_full_conformal",
    "compute_cal_scores",
    "compute_test_scores",
    "crc_feasible",
    "fit_standardizer",
    "label_grid",
    "load_csv",
    "loglik_per_draw",
    "lplus_draws",
    "make_split",
    "mc_expected_size",
    "mean_predictive",
    "miscoverage_losses",
    "neglog_score",
    "predictive_samples",
    "sample_blogistic",
    "sample_blr",
    "select_lambda",
    "set_size_per_input",
    "split_threshold",
    "synthetic_regression",
]
