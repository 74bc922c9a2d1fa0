"""Dataset ingestion and stratified labeled/unlabeled splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

BUNDLED = ("iris", "wine", "wdbc")
_BUNDLED_LABEL_COLUMN = "class"


@dataclass(frozen=True)
class Dataset:
    """Feature matrix with dense integer labels ``0..K-1``.

    ``class_names[k]`` is the label text of class k; ``center``/``scale``
    record the standardization applied (None if features are raw).
    """

    name: str
    features: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]
    feature_names: tuple[str, ...] = ()
    center: np.ndarray | None = None
    scale: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def K(self) -> int:
        return len(self.class_names)


@dataclass(frozen=True)
class SplitMask:
    labeled: np.ndarray
    unlabeled: np.ndarray
    fraction: float
    seed: int


def standardize(X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z-score columns with population std; constant columns map to 0."""
    center = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return (X - center) / scale, center, scale


def load_csv(path, label_column: str, standardize_features: bool = True,
             delimiter: str = ",", name: str | None = None) -> Dataset:
    """Read a headered CSV whose columns are numeric features plus one label column."""
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        if label_column not in header:
            raise ValueError(f"{path}: no column named {label_column!r} (have {header})")
        label_at = header.index(label_column)
        feature_names = tuple(h for k, h in enumerate(header) if k != label_at)
        rows, raw_labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}: row {line_no} has {len(row)} cells, header has {len(header)}")
            values = []
            for k, cell in enumerate(row):
                if k == label_at:
                    continue
                try:
                    v = float(cell)
                except ValueError:
                    v = math.nan
                if not math.isfinite(v):
                    raise ValueError(f"{path}: row {line_no}, column {header[k]!r}: non-numeric value {cell!r}")
                values.append(v)
            label = row[label_at].strip()
            if not label:
                raise ValueError(f"{path}: row {line_no}, column {label_column!r}: missing label")
            rows.append(values)
            raw_labels.append(label)
    if not rows:
        raise ValueError(f"{path}: no data rows")

    class_names: dict[str, int] = {}
    for lab in raw_labels:
        class_names.setdefault(lab, len(class_names))
    if len(class_names) < 2:
        raise ValueError(f"{path}: need at least two classes, found {list(class_names)}")
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_names))
    center = scale = None
    if standardize_features:
        X, center, scale = standardize(X)
    return Dataset(
        name=name or path.stem,
        features=X,
        labels=np.array([class_names[lab] for lab in raw_labels], dtype=int),
        class_names=tuple(class_names),
        feature_names=feature_names,
        center=center,
        scale=scale,
    )


def bundled_path(name: str) -> Path:
    if name not in BUNDLED:
        raise ValueError(f"unknown bundled dataset {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("otprop") / "data" / f"{name}.csv"))


def load_bundled(name: str, standardize_features: bool = True) -> Dataset:
    """Iris, Wine or WDBC (Wisconsin diagnostic breast cancer) from the package data."""
    return load_csv(bundled_path(name), _BUNDLED_LABEL_COLUMN, standardize_features, name=name)


def _quotas(class_sizes: np.ndarray, fraction: float) -> np.ndarray:
    # Largest-remainder apportionment of round(fraction * n) across classes,
    # then at least one labeled point per class.
    n = int(class_sizes.sum())
    total = math.floor(fraction * n + 0.5)
    exact = fraction * class_sizes
    quota = np.floor(exact).astype(int)
    order = sorted(range(class_sizes.size), key=lambda k: (-(exact[k] - quota[k]), k))
    for k in order[: max(0, total - int(quota.sum()))]:
        quota[k] += 1
    return np.minimum(np.maximum(quota, 1), class_sizes)


def make_splits(ds: Dataset, fraction: float, seeds) -> list[SplitMask]:
    """One stratified labeled/unlabeled split per seed.

    About ``round(fraction * n)`` points are labeled, apportioned across
    classes by largest remainder, with at least one per class.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    if fraction * ds.n < ds.K:
        raise ValueError(f"fraction {fraction} labels fewer than one point per class (n={ds.n}, K={ds.K})")
    sizes = np.bincount(ds.labels, minlength=ds.K)
    quota = _quotas(sizes, fraction)
    members = [np.flatnonzero(ds.labels == k) for k in range(ds.K)]
    splits = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        chosen = [rng.choice(idx, size=q, replace=False) for idx, q in zip(members, quota)]
        labeled = np.sort(np.concatenate(chosen))
        mask = np.zeros(ds.n, dtype=bool)
        mask[labeled] = True
        splits.append(SplitMask(labeled, np.flatnonzero(~mask), float(fraction), int(seed)))
    return splits
