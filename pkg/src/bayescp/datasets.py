"""Tabular data loading, seeded splitting, and leakage-free standardization.

All operations are pure functions of their arguments plus an explicit seed,
so repeated calls with the same inputs give identical results.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

TASK_KINDS = ("regression", "classification")

BUILTIN_DATASETS = {
    "diabetes": ("diabetes.csv", "regression"),
    "breast_cancer": ("breast_cancer.csv", "classification"),
}


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus labels for a single supervised task."""

    features: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,)
    feature_names: tuple[str, ...]
    task_kind: str

    def __post_init__(self):
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task_kind {self.task_kind!r}")
        X, y = self.features, self.labels
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError("features must be (n, d) and labels (n,)")
        if X.shape[0] < 3:
            raise ValueError("need at least 3 rows")
        if len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length must match feature count")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("non-finite entries in data")
        if self.task_kind == "classification" and not np.isin(y, (0.0, 1.0)).all():
            raise ValueError("classification labels must lie in {0, 1}")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint train/calibration/test index partition for one seed."""

    train_idx: np.ndarray
    cal_idx: np.ndarray
    test_idx: np.ndarray
    seed: int

    def __post_init__(self):
        parts = (self.train_idx, self.cal_idx, self.test_idx)
        if any(len(p) == 0 for p in parts):
            raise ValueError("every split part must be non-empty")
        allidx = np.concatenate(parts)
        if len(np.unique(allidx)) != len(allidx):
            raise ValueError("split parts overlap")


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine transform fitted on training rows only.

    For regression tasks the label column is standardized too; for
    classification ``label_mean``/``label_sd`` stay ``None``.
    """

    feature_means: np.ndarray
    feature_sds: np.ndarray
    label_mean: float | None
    label_sd: float | None

    def __post_init__(self):
        if np.any(self.feature_sds <= 0):
            raise ValueError("feature sds must be strictly positive")
        if self.label_sd is not None and self.label_sd <= 0:
            raise ValueError("label sd must be strictly positive")


def builtin_path(name: str) -> Path:
    """Filesystem path of a vendored dataset CSV ("diabetes", "breast_cancer")."""
    if name not in BUILTIN_DATASETS:
        raise KeyError(f"no builtin dataset named {name!r}")
    fname, _ = BUILTIN_DATASETS[name]
    return Path(str(resources.files("bayescp").joinpath("data", fname)))


def builtin_dataset(name: str) -> Dataset:
    """Load one of the vendored benchmark datasets by name."""
    fname, task_kind = BUILTIN_DATASETS[name] if name in BUILTIN_DATASETS else (None, None)
    if fname is None:
        raise KeyError(f"no builtin dataset named {name!r}")
    return load_csv(builtin_path(name), task_kind)


def load_csv(path: str | Path, task_kind: str) -> Dataset:
    """Read a header-first CSV whose final column is the label.

    Raises on missing files, non-numeric cells (named by row/column), and
    classification labels outside {0, 1}.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = []
        for r, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise ValueError(f"{path}:{r}: expected {len(header)} cells, got {len(record)}")
            try:
                rows.append([float(cell) for cell in record])
            except ValueError:
                bad = next(c for c in record if not _is_number(c))
                raise ValueError(f"{path}:{r}: non-numeric cell {bad!r}") from None
    if len(rows) < 3:
        raise ValueError(f"{path}: need at least 3 data rows")
    arr = np.asarray(rows, dtype=float)
    X, y = arr[:, :-1], arr[:, -1]
    if task_kind == "classification" and not np.isin(y, (0.0, 1.0)).all():
        bad = y[~np.isin(y, (0.0, 1.0))][0]
        raise ValueError(f"{path}: classification label {bad!r} outside {{0, 1}}")
    return Dataset(X, y, tuple(header[:-1]), task_kind)


def _is_number(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def make_split(n: int, ratios: tuple[float, float, float], seed: int) -> SplitSpec:
    """Partition {0..n-1} into train/cal/test by a seeded shuffle.

    Sizes are floor(ratio_train * n) and floor(ratio_cal * n); the test part
    takes the remainder. The permutation depends only on the seed.
    """
    r_tr, r_cal, r_te = ratios
    if min(r_tr, r_cal, r_te) <= 0:
        raise ValueError("ratios must be positive")
    if abs(r_tr + r_cal + r_te - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    n_tr = int(np.floor(r_tr * n))
    n_cal = int(np.floor(r_cal * n))
    n_te = n - n_tr - n_cal
    if min(n_tr, n_cal, n_te) < 1:
        raise ValueError(f"n={n} too small for ratios {ratios}")
    perm = np.random.default_rng(seed).permutation(n)
    return SplitSpec(
        train_idx=perm[:n_tr],
        cal_idx=perm[n_tr : n_tr + n_cal],
        test_idx=perm[n_tr + n_cal :],
        seed=seed,
    )


def fit_standardizer(data: Dataset, train_idx: np.ndarray) -> Standardizer:
    """Fit column means/sds on the training rows only (ddof=1 sd).

    A constant training column is an error (named in the message) since it
    cannot be scaled to unit sd.
    """
    if len(train_idx) < 2:
        raise ValueError("need at least 2 training rows to standardize")
    Xtr = data.features[train_idx]
    means = Xtr.mean(axis=0)
    sds = Xtr.std(axis=0, ddof=1)
    for j, sd in enumerate(sds):
        if sd <= 0:
            raise ValueError(f"constant training column: {data.feature_names[j]!r}")
    label_mean = label_sd = None
    if data.task_kind == "regression":
        ytr = data.labels[train_idx]
        label_mean = float(ytr.mean())
        label_sd = float(ytr.std(ddof=1))
        if label_sd <= 0:
            raise ValueError("constant training column: labels")
    return Standardizer(means, sds, label_mean, label_sd)


def apply_standardizer(std: Standardizer, data: Dataset) -> Dataset:
    """Transform all rows of ``data`` with the fitted training parameters."""
    X = (data.features - std.feature_means) / std.feature_sds
    y = data.labels
    if data.task_kind == "regression":
        if std.label_mean is None:
            raise ValueError("standardizer was fitted without a label transform")
        y = (y - std.label_mean) / std.label_sd
    return Dataset(X, y, data.feature_names, data.task_kind)


def label_grid(train_labels: np.ndarray, grid_size: int) -> np.ndarray:
    """Evenly spaced candidate labels spanning [min, max] of the training labels."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    lo, hi = float(np.min(train_labels)), float(np.max(train_labels))
    if hi <= lo:
        raise ValueError("degenerate labels: max must exceed min")
    return np.linspace(lo, hi, grid_size)


def synthetic_regression(
    n: int, d: int, true_theta: np.ndarray, noise_sd: float, seed: int
) -> Dataset:
    """Gaussian-design linear data: Y = X theta + Normal(0, noise_sd^2) noise."""
    if noise_sd <= 0:
        raise ValueError("noise_sd must be positive")
    theta = np.asarray(true_theta, dtype=float)
    if theta.shape != (d,):
        raise ValueError("true_theta must have length d")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    y = X @ theta + rng.normal(0.0, noise_sd, size=n)
    names = tuple(f"x{j}" for j in range(d))
    return Dataset(X, y, names, "regression")


def split_to_json(split: SplitSpec) -> str:
    return json.dumps(
        {
            "train_idx": split.train_idx.tolist(),
            "cal_idx": split.cal_idx.tolist(),
            "test_idx": split.test_idx.tolist(),
            "seed": split.seed,
        },
        sort_keys=True,
    )


def split_from_json(text: str) -> SplitSpec:
    obj = json.loads(text)
    return SplitSpec(
        np.asarray(obj["train_idx"], dtype=int),
        np.asarray(obj["cal_idx"], dtype=int),
        np.asarray(obj["test_idx"], dtype=int),
        int(obj["seed"]),
    )


def standardizer_to_json(std: Standardizer) -> str:
    return json.dumps(
        {
            "feature_means": std.feature_means.tolist(),
            "feature_sds": std.feature_sds.tolist(),
            "label_mean": std.label_mean,
            "label_sd": std.label_sd,
        },
        sort_keys=True,
    )


def standardizer_from_json(text: str) -> Standardizer:
    obj = json.loads(text)
    return Standardizer(
        np.asarray(obj["feature_means"], dtype=float),
        np.asarray(obj["feature_sds"], dtype=float),
        obj["label_mean"],
        obj["label_sd"],
    )
