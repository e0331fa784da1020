"""Report emission: deterministic JSON/CSV plus rendered figures.

Numbers are rounded before serialization (coverage to 4 significant digits,
sizes/widths to 3) so identical summaries produce byte-identical files.
Timing fields are included in the output but carry no determinism guarantee.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .experiments import MethodSummary, MetricsSummary

_TIMING_KEYS = ("pred_time", "calib_time", "mcmc_time", "pred_time_mean", "calib_time_mean")


def _sig(x: float | None, digits: int) -> float | None:
    if x is None:
        return None
    if not math.isfinite(x):
        return x
    return float(f"{x:.{digits}g}")


def _jsonsafe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)  # "inf" / "-inf" / "nan"
    if isinstance(obj, dict):
        return {k: _jsonsafe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonsafe(v) for v in obj]
    return obj


def _setting_label(ms: MethodSummary) -> str:
    parts = [f"{k}={v:g}" for k, v in ms.setting.items() if k in ("c", "beta")]
    return ",".join(parts)


def _round_split_row(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if k == "coverage":
            out[k] = _sig(v, 4)
        elif k in ("size", "lambda"):
            out[k] = _sig(v, 3)
        elif isinstance(v, float) and k not in _TIMING_KEYS:
            out[k] = _sig(v, 6)
        else:
            out[k] = v
    return out


def summary_dict(summary: MetricsSummary) -> dict:
    """Report object: {config, per_split, summary, versions, seeds}."""
    per_split = []
    method_block = {}
    for ms in summary.methods:
        label = ms.method if not _setting_label(ms) else f"{ms.method}[{_setting_label(ms)}]"
        method_block[label] = {
            "coverage_mean": _sig(ms.coverage_mean, 4),
            "coverage_sd": _sig(ms.coverage_sd, 4),
            "size_mean": _sig(ms.size_mean, 3),
            "size_sd": _sig(ms.size_sd, 3),
            "pred_time_mean": ms.pred_time_mean,
            "calib_time_mean": ms.calib_time_mean,
            "fallback_count": ms.fallback_count,
            "setting": ms.setting,
        }
        for row in ms.per_split:
            per_split.append({"method": label, **_round_split_row(row)})
    return _jsonsafe(
        {
            "config": summary.config,
            "per_split": per_split,
            "summary": method_block,
            "versions": summary.versions,
            "seeds": summary.seeds,
            "extras": summary.extras,
        }
    )


def _csv_text(summary: MetricsSummary) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "method",
            "setting",
            "coverage_pct",
            "coverage_sd_pct",
            "size",
            "size_sd",
            "miscoverage",
            "gap",
            "pred_s",
            "calib_s",
            "fallbacks",
        ]
    )
    for ms in summary.methods:
        miscoverage = ms.setting.get("miscoverage")
        gap = ms.setting.get("gap")
        writer.writerow(
            [
                ms.method,
                _setting_label(ms),
                _sig(100.0 * ms.coverage_mean, 4),
                _sig(100.0 * ms.coverage_sd, 4),
                _sig(ms.size_mean, 3),
                _sig(ms.size_sd, 3),
                "" if miscoverage is None else _sig(miscoverage, 4),
                "" if gap is None else _sig(gap, 4),
                _sig(ms.pred_time_mean, 3),
                _sig(ms.calib_time_mean, 3),
                ms.fallback_count,
            ]
        )
    return buf.getvalue()


def emit_report(summary: MetricsSummary, fmt: str, path: str | Path) -> Path:
    """Write the summary as JSON or CSV; identical summaries give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path.write_text(json.dumps(summary_dict(summary), sort_keys=True, indent=2) + "\n")
    elif fmt == "csv":
        path.write_text(_csv_text(summary))
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    return path


def render_figures(summary: MetricsSummary, outdir: str | Path, stem: str = "report") -> list[Path]:
    """Render diagnostic figures next to the delimited output.

    Produces per-method coverage and size distributions over splits, the
    size-versus-threshold curve with its feasibility boundary when a
    candidate table was recorded, and the beta-scan trade-off for scans.
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []

    labels = [
        ms.method if not _setting_label(ms) else f"{ms.method}[{_setting_label(ms)}]"
        for ms in summary.methods
    ]
    coverages = [[row["coverage"] for row in ms.per_split] for ms in summary.methods]
    sizes = [[row["size"] for row in ms.per_split] for ms in summary.methods]
    alpha = summary.config.get("alpha")

    fig, axes = plt.subplots(1, 2, figsize=(11, 4))
    axes[0].boxplot(coverages)
    axes[0].set_xticklabels(labels, rotation=20)
    if alpha is not None:
        axes[0].axhline(1.0 - alpha, color="tab:green", ls="--", lw=1, label="target coverage")
        axes[0].legend(loc="best", fontsize=8)
    axes[0].set_ylabel("empirical coverage")
    axes[1].boxplot(sizes)
    axes[1].set_xticklabels(labels, rotation=20)
    ylabel = "interval width" if summary.task_kind == "regression" else "set size"
    axes[1].set_ylabel(ylabel)
    fig.suptitle("Coverage and prediction-set size across splits")
    fig.tight_layout()
    p = outdir / f"{stem}_methods.png"
    fig.savefig(p, dpi=120)
    plt.close(fig)
    paths.append(p)

    table = summary.extras.get("candidate_table")
    if table:
        lams = [row["lambda"] for row in table]
        finite = [i for i, l in enumerate(lams) if isinstance(l, (int, float)) and math.isfinite(l)]
        lam_f = [lams[i] for i in finite]
        mean_f = [table[i]["bq_mean"] for i in finite]
        sd_f = [math.sqrt(max(table[i]["bq_var"], 0.0)) for i in finite]
        feas = [table[i]["feasible"] for i in finite]
        fig, ax = plt.subplots(figsize=(6.5, 4))
        ax.errorbar(lam_f, mean_f, yerr=sd_f, fmt="o-", ms=3, lw=1, label="estimated size")
        if any(feas):
            boundary = lam_f[feas.index(True)]
            ax.axvline(boundary, color="tab:green", ls="--", lw=1, label="feasibility boundary")
        ax.set_xlabel("threshold")
        ax.set_ylabel("expected set size")
        ax.set_title("Expected prediction-set size vs threshold (first split)")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        p = outdir / f"{stem}_size_curve.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        paths.append(p)

    if summary.extras.get("scan") == "beta":
        betas = [ms.setting["beta"] for ms in summary.methods]
        cov = [ms.coverage_mean for ms in summary.methods]
        cov_sd = [ms.coverage_sd for ms in summary.methods]
        wid = [ms.size_mean for ms in summary.methods]
        fig, ax = plt.subplots(figsize=(6.5, 4))
        ax.errorbar(betas, cov, yerr=cov_sd, fmt="o-", color="tab:blue", label="coverage")
        if alpha is not None:
            ax.axhline(1.0 - alpha, color="tab:green", ls="--", lw=1, label="target")
        ax.set_xlabel("confidence parameter")
        ax.set_ylabel("coverage", color="tab:blue")
        ax2 = ax.twinx()
        ax2.plot(betas, wid, "s--", color="tab:red", label="width")
        ax2.set_ylabel("width", color="tab:red")
        ax.set_title("Conservativeness scan")
        fig.tight_layout()
        p = outdir / f"{stem}_beta_scan.png"
        fig.savefig(p, dpi=120)
        plt.close(fig)
        paths.append(p)

    return paths
