"""Discrete entropic optimal transport.

Cost matrices, uniform marginals, a Sinkhorn solver with automatic
log-domain fallback, and a brute-force exact solver used as a test oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

# Scaling vectors outside this band trigger the log-domain iterations.
_SCALING_MAX = 1e100
_SCALING_MIN = 1e-100
_CHECK_EVERY = 10
_MAX_BRUTE_FORCE = 8
_NEWTON_AFTER = 50
_STALL_RATIO = 0.5
_NEWTON_RCOND = 1e-13


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CostMatrix:
    """Pairwise squared Euclidean distances between a source and a target set."""

    values: np.ndarray
    max_entry: float

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @classmethod
    def from_array(cls, values) -> "CostMatrix":
        values = _frozen(values)
        if values.ndim != 2 or values.size == 0:
            raise ValueError(f"cost matrix must be a nonempty 2-D array, got shape {values.shape}")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("cost entries must be finite and nonnegative")
        return cls(values=values, max_entry=float(values.max()))


@dataclass(frozen=True)
class Marginals:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        for name in ("a", "b"):
            vec = np.asarray(getattr(self, name), dtype=np.float64)
            if vec.ndim != 1 or vec.size == 0:
                raise ValueError(f"marginal {name} must be a nonempty vector")
            if np.any(vec <= 0):
                raise ValueError(f"marginal {name} must be strictly positive")
            if abs(vec.sum() - 1.0) > 1e-12:
                raise ValueError(f"marginal {name} must sum to 1, sums to {vec.sum()!r}")
            object.__setattr__(self, name, _frozen(vec))


def uniform_marginals(n_source: int, n_target: int) -> Marginals:
    """Equal weights 1/l on every source point and 1/u on every target point."""
    return Marginals(np.full(n_source, 1.0 / n_source), np.full(n_target, 1.0 / n_target))


@dataclass(frozen=True)
class TransportPlan:
    """Sinkhorn output together with its convergence diagnostics.

    ``epsilon`` is expressed relative to the cost's max entry.
    """

    values: np.ndarray
    epsilon: float
    iterations: int
    marginal_violation: float
    converged: bool
    log_domain: bool = False

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def pairwise_sq_dist(source, target) -> CostMatrix:
    """Squared Euclidean distance between every source row and every target row."""
    source = np.atleast_2d(np.asarray(source, dtype=np.float64))
    target = np.atleast_2d(np.asarray(target, dtype=np.float64))
    if source.shape[0] == 0 or target.shape[0] == 0:
        raise ValueError("point sets must be nonempty")
    if source.shape[1] != target.shape[1]:
        raise ValueError(
            f"dimension mismatch: source has d={source.shape[1]}, target has d={target.shape[1]}"
        )
    # Explicit differences rather than the |x|^2 + |y|^2 - 2xy expansion:
    # exact zeros on coincident points and no cancellation on translation.
    diff = source[:, None, :] - target[None, :, :]
    values = np.einsum("ijk,ijk->ij", diff, diff)
    return CostMatrix(values=_frozen(values), max_entry=float(values.max()))


def _violation(plan: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float(max(np.abs(plan.sum(axis=1) - a).max(), np.abs(plan.sum(axis=0) - b).max()))


def _bad_scaling(x: np.ndarray) -> bool:
    return not np.all(np.isfinite(x)) or x.max() > _SCALING_MAX or x.min() < _SCALING_MIN


def _lse(A: np.ndarray, axis: int) -> np.ndarray:
    m = A.max(axis=axis, keepdims=True)
    return np.log(np.exp(A - m).sum(axis=axis)) + np.squeeze(m, axis=axis)


def _stalled(err: float, prev_err: float, it: int) -> bool:
    # Linear rate slower than ~0.93 per iteration over the last window.
    return it >= _NEWTON_AFTER and err > _STALL_RATIO * prev_err


class _Solver:
    """Mutable iteration state shared by the scaling, log-domain and Newton phases."""

    def __init__(self, C, a, b, epsilon, tol, max_iter):
        self.C, self.a, self.b = C, a, b
        self.eps, self.tol, self.max_iter = epsilon, tol, max_iter
        self.it = 0
        self.log_domain = False

    def plan_from_potentials(self, f, g):
        with np.errstate(over="ignore"):
            return np.exp((f[:, None] + g[None, :] - self.C) / self.eps)

    def result(self, plan, converged):
        err = _violation(plan, self.a, self.b)
        return TransportPlan(_frozen(plan), self.eps, self.it, err, converged, self.log_domain)

    def run(self) -> TransportPlan:
        K = np.exp(-self.C / self.eps)
        g = np.zeros(self.b.size)
        if np.all(K.sum(axis=1) > 0) and np.all(K.sum(axis=0) > 0):
            out = self.scaling(K)
            if isinstance(out, TransportPlan):
                return out
            g = out
        self.log_domain = True
        return self.log_iterations(g)

    def scaling(self, K):
        """Plain Sinkhorn; returns a plan, or dual potential g to continue in log space."""
        a, b = self.a, self.b
        v = np.ones(b.size)
        u = np.ones(a.size)
        prev_err = math.inf
        while self.it < self.max_iter:
            # overflow here is detected below and handed to the log domain
            with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
                u_new = a / (K @ v)
                v_new = b / (K.T @ u_new)
            if _bad_scaling(u_new) or _bad_scaling(v_new):
                return self.eps * np.log(v)
            u, v = u_new, v_new
            self.it += 1
            if self.it % _CHECK_EVERY == 0 or self.it == self.max_iter:
                plan = u[:, None] * K * v[None, :]
                err = _violation(plan, a, b)
                if err <= self.tol:
                    return self.result(plan, True)
                if _stalled(err, prev_err, self.it):
                    polished = self.newton(self.eps * np.log(u), self.eps * np.log(v))
                    if polished is not None:
                        return polished
                prev_err = err
        return self.result(u[:, None] * K * v[None, :], False)

    def log_iterations(self, g):
        C, eps = self.C, self.eps
        log_a, log_b = np.log(self.a), np.log(self.b)
        f = eps * (log_a - _lse((g[None, :] - C) / eps, axis=1))
        prev_err = math.inf
        while self.it < self.max_iter:
            f = eps * (log_a - _lse((g[None, :] - C) / eps, axis=1))
            g = eps * (log_b - _lse((f[:, None] - C) / eps, axis=0))
            self.it += 1
            if self.it % _CHECK_EVERY == 0 or self.it == self.max_iter:
                plan = self.plan_from_potentials(f, g)
                err = _violation(plan, self.a, self.b)
                if err <= self.tol:
                    return self.result(plan, True)
                if _stalled(err, prev_err, self.it):
                    polished = self.newton(f, g)
                    if polished is not None:
                        return polished
                prev_err = err
        return self.result(self.plan_from_potentials(f, g), False)

    def newton(self, f, g):
        """Damped Newton on the marginal equations in the dual potentials.

        Solves the same scaling problem; used once plain iterations stall.
        Returns None when a step cannot reduce the residual, leaving the
        caller to continue with ordinary iterations.
        """
        a, b, eps = self.a, self.b, self.eps
        n, m = a.size, b.size
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(g))):
            return None

        def residual(f, g):
            T = self.plan_from_potentials(f, g)
            with np.errstate(over="ignore", invalid="ignore"):
                r = np.concatenate([T.sum(axis=1) - a, T.sum(axis=0) - b])
            return T, r

        T, r = residual(f, g)
        while self.it < self.max_iter:
            err = float(np.abs(r).max())
            if err <= self.tol:
                self.log_domain = True
                return self.result(T, True)
            row, col = T.sum(axis=1), T.sum(axis=0)
            J = np.empty((n + m, n + m))
            J[:n, :n] = np.diag(row)
            J[:n, n:] = T
            J[n:, :n] = T.T
            J[n:, n:] = np.diag(col)
            # J is singular along (1, -1) and nearly so across weakly coupled
            # blocks of the plan; truncated SVD drops those directions.
            try:
                step = np.linalg.lstsq(J, -eps * r, rcond=_NEWTON_RCOND)[0]
            except np.linalg.LinAlgError:
                return None
            norm = np.linalg.norm(r)
            s = 1.0
            for _ in range(40):
                f_try, g_try = f + s * step[:n], g + s * step[n:]
                T_try, r_try = residual(f_try, g_try)
                if np.all(np.isfinite(r_try)) and np.linalg.norm(r_try) < (1 - 1e-4 * s) * norm:
                    break
                s *= 0.5
            else:
                return None
            f, g, T, r = f_try, g_try, T_try, r_try
            self.it += 1
        self.log_domain = True
        return self.result(T, False)


def sinkhorn(
    M: CostMatrix,
    marg: Marginals,
    epsilon: float = 0.1,
    tol: float = 1e-9,
    max_iter: int = 10_000,
) -> TransportPlan:
    """Entropy-regularized transport plan between ``marg.a`` and ``marg.b``.

    The cost is divided by its max entry before exponentiation, so
    ``epsilon`` is scale-free. Alternates ``u = a / Kv`` and ``v = b / K^T u``
    from ``v = 1``; the marginal violation is checked every 10 iterations.
    If a scaling vector leaves [1e-100, 1e100] (or the Gibbs kernel has an
    all-zero row or column) the solver continues with log-domain updates of
    the dual potentials. When the linear rate stalls (small epsilon, nearly
    disconnected plans) damped Newton steps on the same marginal equations
    finish the job. Hitting ``max_iter`` returns the current plan with
    ``converged=False``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    a, b = marg.a, marg.b
    if M.shape != (a.size, b.size):
        raise ValueError(f"cost shape {M.shape} does not match marginals ({a.size}, {b.size})")
    scale = M.max_entry if M.max_entry > 0 else 1.0
    return _Solver(M.values / scale, a, b, epsilon, tol, max_iter).run()


def entropic_linear_cost(plan: TransportPlan | np.ndarray, M: CostMatrix | np.ndarray) -> float:
    """Frobenius inner product of a plan with the (unnormalized) cost."""
    T = plan.values if isinstance(plan, TransportPlan) else np.asarray(plan, dtype=np.float64)
    C = M.values if isinstance(M, CostMatrix) else np.asarray(M, dtype=np.float64)
    if T.shape != C.shape:
        raise ValueError(f"shape mismatch: plan {T.shape} vs cost {C.shape}")
    return float(np.sum(T * C))


def exact_ot_uniform_small(M: CostMatrix | np.ndarray) -> tuple[float, tuple[int, ...]]:
    """Exact OT between two uniform measures of equal size by enumerating permutations.

    Returns the minimal average cost ``mean_i M[i, sigma(i)]`` and the
    lexicographically first minimizing permutation. Limited to n <= 8.
    """
    C = M.values if isinstance(M, CostMatrix) else np.asarray(M, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1] or C.shape[0] == 0:
        raise ValueError(f"need a nonempty square cost matrix, got shape {C.shape}")
    n = C.shape[0]
    if n > _MAX_BRUTE_FORCE:
        raise ValueError(f"n={n} exceeds brute-force limit of {_MAX_BRUTE_FORCE}")
    perms = np.array(list(itertools.permutations(range(n))))
    totals = C[np.arange(n), perms].sum(axis=1)
    best = int(np.argmin(totals))
    return float(totals[best] / n), tuple(int(i) for i in perms[best])
