"""Command-line entry point.

Subcommands: regress, classify, beta-scan, compare, selftest. Options can
come from a JSON config file (--config) with command-line flags taking
precedence; the output directory can also be set via the BCP_OUT
environment variable. Exit codes: 0 success, 1 runtime failure, 2 usage.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

from .experiments import (
    CLASSIFICATION_METHODS,
    REGRESSION_METHODS,
    ExperimentConfig,
    MetricsSummary,
    apply_profile,
    beta_scan,
    run_classification_experiment,
    run_regression_experiment,
)
from .reporting import emit_report, render_figures
from .selftest import run_selftest


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", help="dataset CSV path or builtin name")
    p.add_argument("--config", help="JSON config file; flags override its values")
    p.add_argument("--alpha", type=float, help="target miscoverage level")
    p.add_argument("--beta", type=float, help="confidence parameter for risk control")
    p.add_argument("--betas", help="comma-separated beta list (beta-scan)")
    p.add_argument("--c", type=float, dest="prior_c", help="prior scale for the noise sd")
    p.add_argument("--splits", type=int, dest="n_splits", help="number of random splits")
    p.add_argument("--iters", type=int, dest="total_iters", help="MCMC iterations")
    p.add_argument("--burnin", type=int, dest="burn_in", help="MCMC burn-in iterations")
    p.add_argument("--grid-size", type=int, dest="grid_size", help="candidate-label grid size")
    p.add_argument("--methods", help="comma-separated method list")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--profile", choices=("desk", "paper"), default="desk")
    p.add_argument("--out", help="output directory (default BCP_OUT or ./reports)")
    p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p.add_argument("--hpd", action="store_true", help="HPD credible intervals instead of equal-tailed")
    p.add_argument(
        "--asymmetric-scores",
        action="store_true",
        help="score calibration points with the plain predictive mean",
    )
    p.add_argument("--mc", action="store_true", dest="use_mc", help="empirical-mean size estimates instead of GP quadrature")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="bayescp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("regress", "regression benchmark on one prior scale"),
        ("classify", "binary classification benchmark"),
        ("beta-scan", "conservativeness scan over beta values"),
        ("compare", "all methods (and both prior scales for regression)"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "compare":
            p.add_argument("--task", choices=("regression", "classification"), default="regression")
    sub.add_parser("selftest", help="run the invariant checks and exit non-zero on failure")
    return parser.parse_args(argv)


_CONFIG_FIELDS = {f.name for f in fields(ExperimentConfig)}


def build_config(args: argparse.Namespace, task_kind: str, methods: tuple[str, ...]) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise FileNotFoundError(f"config file not found: {path}")
        loaded = json.loads(path.read_text())
        unknown = set(loaded) - _CONFIG_FIELDS - {"profile", "out", "format"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        values.update({k: v for k, v in loaded.items() if k in _CONFIG_FIELDS})

    for name in (
        "alpha",
        "beta",
        "prior_c",
        "n_splits",
        "total_iters",
        "burn_in",
        "grid_size",
        "seed",
    ):
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    if getattr(args, "data", None):
        values["data"] = args.data
    if getattr(args, "methods", None):
        values["methods"] = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    if getattr(args, "betas", None):
        values["betas"] = tuple(float(b) for b in args.betas.split(","))
    for flag in ("hpd", "use_mc"):
        if getattr(args, flag, False):
            values[flag] = True
    if getattr(args, "asymmetric_scores", False):
        values["asymmetric_scores"] = True

    values.setdefault("data", "diabetes" if task_kind == "regression" else "breast_cancer")
    values.setdefault("methods", methods)
    values["methods"] = tuple(values["methods"])
    values["task_kind"] = task_kind
    if "ratios" in values:
        values["ratios"] = tuple(values["ratios"])
    if "betas" in values:
        values["betas"] = tuple(values["betas"])
    config = ExperimentConfig(**values)
    explicit = {k for k in ("n_splits", "total_iters", "burn_in") if k in values}
    profiled = apply_profile(config, args.profile)
    # Explicit flags/config values win over the profile presets.
    keep = {k: values[k] for k in explicit}
    if keep:
        merged = asdict(profiled)
        merged.update(keep)
        merged["methods"] = tuple(merged["methods"])
        merged["ratios"] = tuple(merged["ratios"])
        merged["betas"] = tuple(merged["betas"])
        profiled = ExperimentConfig(**merged)
    return profiled


def _outdir(args: argparse.Namespace) -> Path:
    out = getattr(args, "out", None) or os.environ.get("BCP_OUT") or "reports"
    return Path(out)


def _emit(summary: MetricsSummary, args: argparse.Namespace, stem: str) -> None:
    outdir = _outdir(args)
    fmts = ("json", "csv") if args.format == "both" else (args.format,)
    for fmt in fmts:
        path = emit_report(summary, fmt, outdir / f"{stem}.{fmt}")
        print(f"wrote {path}")
    if not args.no_plots:
        for path in render_figures(summary, outdir, stem):
            print(f"wrote {path}")


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        if args.command == "selftest":
            failures = run_selftest()
            print(f"selftest: {failures} failure(s)")
            return 0 if failures == 0 else 1

        if args.command == "regress":
            config = build_config(args, "regression", REGRESSION_METHODS)
            summary = run_regression_experiment(config)
            _emit(summary, args, f"regress_c{config.prior_c:g}")
        elif args.command == "classify":
            config = build_config(args, "classification", CLASSIFICATION_METHODS[:4])
            summary = run_classification_experiment(config)
            _emit(summary, args, "classify")
        elif args.command == "beta-scan":
            config = build_config(args, "regression", ("bcp",))
            if not config.betas:
                config = ExperimentConfig(
                    **{**asdict(config), "betas": (0.6, 0.65, 0.7, 0.8, 0.9)}
                )
            summary = beta_scan(config)
            _emit(summary, args, "beta_scan")
        elif args.command == "compare":
            if args.task == "regression":
                for c in (1.0, 0.02):
                    base = build_config(args, "regression", REGRESSION_METHODS)
                    config = ExperimentConfig(**{**asdict(base), "prior_c": c})
                    summary = run_regression_experiment(config)
                    _emit(summary, args, f"compare_regression_c{c:g}")
            else:
                config = build_config(args, "classification", CLASSIFICATION_METHODS[:4])
                summary = run_classification_experiment(config)
                _emit(summary, args, "compare_classification")
        return 0
    except (FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except RuntimeError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
