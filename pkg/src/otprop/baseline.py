"""Gaussian-kernel label propagation with clamped labeled nodes (the LP comparator)."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .ot import pairwise_sq_dist


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GaussianAffinity:
    values: np.ndarray
    sigma: float


def gaussian_affinity(X, sigma: float) -> GaussianAffinity:
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    D = pairwise_sq_dist(X, X).values
    return GaussianAffinity(np.exp(-D / (2.0 * sigma**2)), float(sigma))


def lp_propagate(W: GaussianAffinity | np.ndarray, Y_L, tol: float = 1e-6,
                 max_iter: int = 1000) -> np.ndarray:
    """Labels for the nodes after the first ``len(Y_L)``, which are the labeled ones.

    Iterates ``F <- D^-1 W F`` from zero scores on the unlabeled nodes,
    resetting labeled rows to their one-hot encoding after each step, until
    the largest change is at most ``tol``. Argmax ties go to the lowest
    class. Emits a ConvergenceWarning and returns the last iterate's labels
    when ``max_iter`` is hit.
    """
    W = W.values if isinstance(W, GaussianAffinity) else np.asarray(W, dtype=np.float64)
    Y_L = np.asarray(Y_L)
    l, n = Y_L.size, W.shape[0]
    if W.shape != (n, n) or not 0 < l < n:
        raise ValueError(f"need a square affinity over more than {l} nodes, got {W.shape}")
    classes, y_idx = np.unique(Y_L, return_inverse=True)
    P = W / W.sum(axis=1, keepdims=True)
    clamp = np.zeros((l, classes.size))
    clamp[np.arange(l), y_idx] = 1.0
    F = np.zeros((n, classes.size))
    F[:l] = clamp
    P_ul, P_uu = P[l:, :l] @ clamp, P[l:, l:]
    for _ in range(max_iter):
        F_u = P_ul + P_uu @ F[l:]
        change = np.abs(F_u - F[l:]).max()
        F[l:] = F_u
        if change <= tol:
            break
    else:
        warnings.warn(
            f"label propagation stopped at max_iter={max_iter} with change {change:.3g}",
            ConvergenceWarning, stacklevel=2,
        )
    return classes[np.argmax(F[l:], axis=1)]
