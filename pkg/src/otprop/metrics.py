"""Agreement measures between a true and a predicted labeling."""

from __future__ import annotations

from collections.abc import Mapping, Sequence

import numpy as np


def _pair(truth, predicted) -> tuple[np.ndarray, np.ndarray]:
    truth = np.asarray(truth)
    predicted = np.asarray(predicted)
    if truth.ndim != 1 or truth.shape != predicted.shape:
        raise ValueError(f"label sequences must be 1-D and equally long, got {truth.shape} and {predicted.shape}")
    if truth.size == 0:
        raise ValueError("label sequences are empty")
    return truth, predicted


def contingency(truth, predicted) -> np.ndarray:
    """Counts n_ij of positions with true class i and predicted class j."""
    truth, predicted = _pair(truth, predicted)
    t_vals, ti = np.unique(truth, return_inverse=True)
    p_vals, pi = np.unique(predicted, return_inverse=True)
    cells = np.bincount(ti * p_vals.size + pi, minlength=t_vals.size * p_vals.size)
    return cells.reshape(t_vals.size, p_vals.size)


def accuracy(truth, predicted) -> float:
    truth, predicted = _pair(truth, predicted)
    return float(np.mean(truth == predicted))


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p @ np.log(p)))


def nmi(truth, predicted) -> float:
    """Mutual information normalized by the arithmetic mean of the two entropies.

    Two single-cluster labelings score 1; a single cluster against a
    non-trivial partition scores 0.
    """
    table = contingency(truth, predicted)
    n = int(table.sum())
    rows, cols = table.sum(axis=1), table.sum(axis=0)
    h_true = _entropy(rows, n)
    h_pred = _entropy(cols, n)
    if h_true == 0.0 and h_pred == 0.0:
        return 1.0
    if h_true == 0.0 or h_pred == 0.0:
        return 0.0
    i, j = np.nonzero(table)
    nij = table[i, j]
    mi = float(nij @ np.log(nij * n / (rows[i] * cols[j]))) / n
    return min(max(2.0 * mi / (h_true + h_pred), 0.0), 1.0)


def _pairs(counts: np.ndarray) -> float:
    return float(counts @ (counts - 1)) / 2.0


def ari(truth, predicted) -> float:
    """Adjusted Rand index from pair counts; 1 when the chance-corrected denominator vanishes."""
    truth, predicted = _pair(truth, predicted)
    n = truth.size
    if n < 2:
        raise ValueError("ARI needs at least two points")
    table = contingency(truth, predicted)
    flat = table.ravel()
    index = _pairs(flat)
    rows = _pairs(table.sum(axis=1))
    cols = _pairs(table.sum(axis=0))
    expected = rows * cols / (n * (n - 1) / 2.0)
    max_index = (rows + cols) / 2.0
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)


def score_measure(perf: Mapping[str, Sequence[float] | Mapping[str, float]]) -> dict[str, float]:
    """Sum over datasets of each algorithm's performance relative to the best one.

    ``perf`` maps an algorithm to its per-dataset values, either as
    equally long sequences or as ``{dataset: value}`` maps over the same keys.
    """
    if not perf:
        return {}
    algos = list(perf)
    first = perf[algos[0]]
    if isinstance(first, Mapping):
        keys = list(first)
        for a in algos:
            if not isinstance(perf[a], Mapping) or set(perf[a]) != set(keys):
                raise ValueError(f"algorithm {a!r} is missing datasets")
        table = np.array([[perf[a][k] for k in keys] for a in algos], dtype=np.float64)
    else:
        lengths = {len(perf[a]) for a in algos}
        if len(lengths) != 1:
            raise ValueError("every algorithm needs a value for every dataset")
        table = np.array([list(perf[a]) for a in algos], dtype=np.float64)
    if table.size == 0 or not np.all(np.isfinite(table)):
        raise ValueError("performance table has missing cells")
    if np.any(table <= 0):
        raise ValueError("performances must be positive")
    ratios = table / table.max(axis=0, keepdims=True)
    return {a: float(r) for a, r in zip(algos, ratios.sum(axis=1))}
