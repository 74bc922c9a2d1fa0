"""Transductive label propagation over an optimal-transport bipartite graph.

Each round transports the labeled set onto the unlabeled set, turns the
column-normalized plan into per-class probabilities, and commits labels for
the points whose entropy-based certainty clears the threshold.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .ot import TransportPlan, pairwise_sq_dist, sinkhorn, uniform_marginals

_DEGENERATE_COLUMN = 1e-300


@dataclass(frozen=True)
class AffinityMatrix:
    """Column-stochastic l x u matrix; ``degenerate_columns`` were replaced by 1/l."""

    values: np.ndarray
    degenerate_columns: tuple[int, ...] = ()


@dataclass(frozen=True)
class ClassProbabilityMatrix:
    values: np.ndarray
    class_ids: tuple

    @property
    def n_classes(self) -> int:
        return len(self.class_ids)


@dataclass(frozen=True)
class OTPConfig:
    """Propagation settings; ``epsilon`` is relative to the largest cost entry."""

    epsilon: float = 0.01
    alpha: float = 0.0
    tol: float = 1e-9
    max_iter: int = 10_000

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")


@dataclass(frozen=True)
class IterationRecord:
    t: int
    m_t: int
    n_t: int
    zeta_t: int
    alpha_used: float
    relaxed: bool
    sinkhorn_iterations: int
    marginal_violation: float


@dataclass(frozen=True)
class PointRecord:
    iteration: int
    certainty: float
    label: object


@dataclass
class PropagationTrace:
    """Bookkeeping for one propagation run.

    ``points[j]`` describes unlabeled point j (in the caller's order). The
    ``final_*`` fields hold the last round's graph, which is what induction
    and the transductive-consistency check need.
    """

    n_labeled: int
    n_unlabeled: int
    epsilon: float
    iterations: list[IterationRecord] = field(default_factory=list)
    points: list[PointRecord | None] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    final_cost_max: float = 0.0
    final_affinity: np.ndarray | None = None
    final_labeled_rows: np.ndarray | None = None
    final_unlabeled_cols: np.ndarray | None = None

    @property
    def n_iterations(self) -> int:
        return len(self.iterations)

    def check_conservation(self) -> None:
        """Raise AssertionError if the labeled/unlabeled counts do not add up."""
        total = self.n_labeled + self.n_unlabeled
        m, n = self.n_labeled, self.n_unlabeled
        for rec in self.iterations:
            assert rec.m_t == m + rec.zeta_t, rec
            assert rec.n_t == n - rec.zeta_t, rec
            assert rec.m_t + rec.n_t == total, rec
            m, n = rec.m_t, rec.n_t
        assert n == 0, f"{n} points left unlabeled"
        assert sum(r.zeta_t for r in self.iterations) == self.n_unlabeled

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "m_t", "n_t", "zeta_t", "alpha_used", "relaxed"])
        for r in self.iterations:
            writer.writerow([r.t, r.m_t, r.n_t, r.zeta_t, repr(float(r.alpha_used)), int(r.relaxed)])
        return buf.getvalue()


def column_normalize(plan: TransportPlan | np.ndarray) -> AffinityMatrix:
    T = plan.values if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    sums = T.sum(axis=0)
    bad = np.flatnonzero(sums < _DEGENERATE_COLUMN)
    with np.errstate(divide="ignore", invalid="ignore"):
        P = T / sums[None, :]
    if bad.size:
        P[:, bad] = 1.0 / T.shape[0]
    return AffinityMatrix(P, tuple(int(j) for j in bad))


def class_probability_matrix(P: AffinityMatrix | np.ndarray, labels, K: int | None = None,
                             class_ids=None) -> ClassProbabilityMatrix:
    """Sum the affinity column of every unlabeled point over each class's labeled rows.

    ``labels`` holds class indices in ``range(K)`` unless ``class_ids`` is
    given, in which case they are looked up in it.
    """
    P = P.values if isinstance(P, AffinityMatrix) else np.asarray(P, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.shape != (P.shape[0],):
        raise ValueError(f"need one label per affinity row, got {labels.shape} for {P.shape}")
    if class_ids is None:
        if K is None:
            raise ValueError("give either K or class_ids")
        class_ids = tuple(range(K))
        idx = labels.astype(int)
        if np.any(idx < 0) or np.any(idx >= K):
            raise ValueError("labels must be class indices in range(K)")
    else:
        class_ids = tuple(class_ids)
        lookup = {c: k for k, c in enumerate(class_ids)}
        idx = np.array([lookup[c] for c in labels.tolist()], dtype=int)
    counts = np.bincount(idx, minlength=len(class_ids))
    missing = [class_ids[k] for k in np.flatnonzero(counts == 0)]
    if missing:
        raise ValueError(f"classes without labeled representatives: {missing}")
    onehot = np.zeros((P.shape[0], len(class_ids)))
    onehot[np.arange(P.shape[0]), idx] = 1.0
    return ClassProbabilityMatrix(P.T @ onehot, class_ids)


def certainty_scores(U: ClassProbabilityMatrix | np.ndarray) -> np.ndarray:
    """One minus the base-2 Shannon entropy of each row, normalized by log2(K).

    A single class counts as fully certain.
    """
    U = U.values if isinstance(U, ClassProbabilityMatrix) else np.asarray(U, dtype=np.float64)
    K = U.shape[1]
    if K == 1:
        return np.ones(U.shape[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(U > 0, U * np.log2(U), 0.0)
    H = -terms.sum(axis=1)
    return np.clip(1.0 - H / np.log2(K), 0.0, 1.0)


def assign_labels(U: ClassProbabilityMatrix | np.ndarray, s, alpha: float, inclusive: bool = False):
    """Pick the points whose certainty clears ``alpha`` and their argmax class.

    Returns ``(indices, class_indices, certainties)``; argmax ties go to
    the lowest class index. ``inclusive`` switches the test from ``>`` to
    ``>=`` (used right after the threshold is relaxed).
    """
    U = U.values if isinstance(U, ClassProbabilityMatrix) else np.asarray(U, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    picked = np.flatnonzero(s >= alpha if inclusive else s > alpha)
    return picked, np.argmax(U[picked], axis=1), s[picked]


def relax_alpha(alpha: float, s) -> float:
    """Lower the threshold just enough for the most certain stalled point to tie it."""
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0:
        raise ValueError("no unlabeled points left to relax the threshold for")
    # alpha - min(alpha - s) is max(s); computed directly so the tie is exact.
    return float(np.max(s))


def propagate(X_L, Y_L, X_U, config: OTPConfig | None = None, **overrides):
    """Label every point of ``X_U`` starting from the labeled pairs ``(X_L, Y_L)``.

    Returns ``(Y_U, trace)``. Every round solves the transport problem from
    the current labeled set to the remaining unlabeled points with uniform
    weights, then labels, in one batch, all points whose certainty exceeds
    ``alpha``. A round in which nobody qualifies lowers the threshold to the
    best remaining score for that round only.
    """
    if config is None:
        config = OTPConfig(**overrides)
    elif overrides:
        raise TypeError("pass either config or keyword overrides, not both")
    X_L = np.atleast_2d(np.asarray(X_L, dtype=np.float64))
    X_U = np.atleast_2d(np.asarray(X_U, dtype=np.float64))
    Y_L = np.asarray(Y_L)
    if X_U.shape[0] == 0:
        raise ValueError("X_U is empty")
    if X_L.shape[0] != Y_L.shape[0]:
        raise ValueError("X_L and Y_L differ in length")
    if X_L.shape[1] != X_U.shape[1]:
        raise ValueError(f"dimension mismatch: X_L d={X_L.shape[1]}, X_U d={X_U.shape[1]}")

    class_ids = tuple(np.unique(Y_L).tolist())
    K = len(class_ids)
    y_idx = np.searchsorted(np.asarray(class_ids), Y_L)

    l, u = X_L.shape[0], X_U.shape[0]
    trace = PropagationTrace(n_labeled=l, n_unlabeled=u, epsilon=config.epsilon, points=[None] * u)
    lab_X, lab_y = X_L, y_idx
    remaining = np.arange(u)
    assigned = np.full(u, -1, dtype=int)

    t = 0
    while remaining.size:
        t += 1
        M = pairwise_sq_dist(lab_X, X_U[remaining])
        plan = sinkhorn(M, uniform_marginals(lab_X.shape[0], remaining.size),
                        config.epsilon, config.tol, config.max_iter)
        if not plan.converged:
            trace.warnings.append(
                f"t={t}: sinkhorn stopped at {plan.iterations} iterations, "
                f"marginal violation {plan.marginal_violation:.3g}"
            )
        P = column_normalize(plan)
        if P.degenerate_columns:
            trace.warnings.append(f"t={t}: degenerate affinity columns {list(P.degenerate_columns)}")
        U = class_probability_matrix(P, lab_y, K)
        s = certainty_scores(U)

        alpha_used, relaxed = config.alpha, False
        picked, cls, cert = assign_labels(U, s, alpha_used)
        if picked.size == 0:
            alpha_used, relaxed = relax_alpha(config.alpha, s), True
            picked, cls, cert = assign_labels(U, s, alpha_used, inclusive=True)

        trace.final_cost_max = M.max_entry
        trace.final_affinity = P.values
        trace.final_labeled_rows = lab_y.copy()
        trace.final_unlabeled_cols = remaining.copy()

        newly = remaining[picked]
        assigned[newly] = cls
        for j, k, c in zip(newly.tolist(), cls.tolist(), cert.tolist()):
            trace.points[j] = PointRecord(t, c, class_ids[k])
        lab_X = np.vstack([lab_X, X_U[newly]])
        lab_y = np.concatenate([lab_y, cls])
        keep = np.ones(remaining.size, dtype=bool)
        keep[picked] = False
        remaining = remaining[keep]
        m_t = lab_X.shape[0]
        trace.iterations.append(IterationRecord(
            t, m_t, remaining.size, newly.size, alpha_used, relaxed,
            plan.iterations, plan.marginal_violation,
        ))

    return np.asarray(class_ids)[assigned], trace
