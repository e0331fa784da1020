#!/usr/bin/env python3
"""Regenerate the vendored benchmark CSVs under src/bayescp/data/.

The repository already ships both files, so nothing (tests included) ever
needs to run this script. It exists so the provenance of the vendored data
is reproducible: both tables come bundled with scikit-learn.
"""

import csv
from pathlib import Path

from sklearn.datasets import load_breast_cancer, load_diabetes

OUT_DIR = Path(__file__).resolve().parent.parent / "src" / "bayescp" / "data"


def write_diabetes(path: Path) -> None:
    d = load_diabetes(scaled=False)
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(list(d.feature_names) + ["progression"])
        for row, y in zip(d.data, d.target):
            w.writerow([repr(float(v)) for v in row] + [repr(float(y))])


def write_breast_cancer(path: Path) -> None:
    b = load_breast_cancer()
    names = [n.replace(" ", "_") for n in b.feature_names]
    with path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(names + ["malignant"])
        for row, y in zip(b.data, b.target):
            # scikit-learn encodes 0 = malignant; flip so 1 = malignant.
            w.writerow([repr(float(v)) for v in row] + [int(1 - y)])


if __name__ == "__main__":
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    write_diabetes(OUT_DIR / "diabetes.csv")
    write_breast_cancer(OUT_DIR / "breast_cancer.csv")
    print(f"wrote {OUT_DIR / 'diabetes.csv'}")
    print(f"wrote {OUT_DIR / 'breast_cancer.csv'}")
