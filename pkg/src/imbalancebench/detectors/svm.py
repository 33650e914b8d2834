"""Kernel SVMs solved by a pairwise working-set dual optimizer.

One SMO core serves both detectors.  It minimizes

    0.5 * a' Q a + p' a     with Q_ij = y_i y_j K(x_i, x_j),
    subject to 0 <= a_i <= C_i and sum_i y_i a_i fixed by the start point,

by repeatedly picking the maximal violating pair (first-order selection)
and solving the two-variable subproblem in closed form with clipping to the
box.  Convergence is declared when the KKT violation falls below the
tolerance (1e-3); exceeding the iteration budget raises, which the tuning
layer turns into a grid-point exclusion.  The sigmoid kernel is indefinite;
non-positive pair curvature is clamped to a small positive value, the
standard remedy.

  * One-class detector: all-ones labels, zero linear term, box [0, 1] and
    sum(a) = nu*n (started from the canonical feasible point).  Score is
    the negated decision value, so higher means more anomalous.
  * Two-class detector: labels +/-1 (faulty positive), linear term -1 and
    per-sample box C_i = C * n/(2 * n_class(i)) ("balanced" class weights).
    Score is the signed decision value, positive on the faulty side.

Kernel matrices are precomputed up to a size cap and generated column-wise
above it (desk-scale problems fit comfortably).  "auto" gamma is 1/d;
"scale" is 1/(d * var(X)) over the matrix the kernel actually sees.
"""

from __future__ import annotations

import numpy as np

from ._cache import MatrixCache, array_key
from ._kernels import smo_dense
from .base import FitError

__all__ = ["fit_ocsvm", "fit_svc", "smo_solve", "kernel_function", "OCSVM_KEYS", "SVC_KEYS"]

OCSVM_KEYS = {"kernel", "gamma", "nu", "contamination"}
SVC_KEYS = {"kernel", "gamma", "c", "class_weight", "break_ties"}

_TAU = 1e-12
_PRECOMPUTE_LIMIT = 8192  # full kernel matrix up to this many rows

_gram_cache = MatrixCache()


class ConvergenceError(RuntimeError):
    pass


class _Kernel:
    """Gram-block evaluator with a cheap diagonal."""

    def __init__(self, kind: str, gamma: float):
        if kind not in ("linear", "rbf", "sigmoid"):
            raise ValueError(f"unknown kernel {kind!r}")
        self.kind = kind
        self.gamma = gamma

    def __call__(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        lin = A @ B.T
        if self.kind == "linear":
            return lin
        if self.kind == "sigmoid":
            return np.tanh(self.gamma * lin)  # coef0 = 0
        sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * lin
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-self.gamma * sq)

    def diag(self, A: np.ndarray) -> np.ndarray:
        if self.kind == "rbf":
            return np.ones(A.shape[0])
        sq = np.einsum("ij,ij->i", A, A)
        return np.tanh(self.gamma * sq) if self.kind == "sigmoid" else sq


def kernel_function(kind: str, gamma: float) -> _Kernel:
    """k(A, B) -> (len(A), len(B)) Gram block for the named kernel."""
    return _Kernel(kind, gamma)


def resolve_gamma(gamma, X: np.ndarray) -> float:
    if gamma == "auto":
        return 1.0 / X.shape[1]
    if gamma == "scale":
        var = float(X.var())
        return 1.0 / (X.shape[1] * var) if var > 0 else 1.0 / X.shape[1]
    value = float(gamma)
    if value <= 0:
        raise ValueError(f"gamma must be positive, got {value}")
    return value


class _ColumnKernel:
    """Kernel column access: dense (content-cached) when small, on demand when large."""

    def __init__(self, X: np.ndarray, kernel):
        self.X = X
        self.kernel = kernel
        if X.shape[0] <= _PRECOMPUTE_LIMIT:
            self.dense = _gram_cache.get_or_compute(
                array_key(b"gram", kernel.kind, kernel.gamma, X),
                X.shape[0] * X.shape[0],
                lambda: kernel(X, X),
            )
        else:
            self.dense = None

    def diag(self) -> np.ndarray:
        if self.dense is not None:
            return np.diagonal(self.dense).copy()
        return self.kernel.diag(self.X)

    def col(self, i: int) -> np.ndarray:
        if self.dense is not None:
            return self.dense[:, i]
        return self.kernel(self.X, self.X[i : i + 1])[:, 0]


def smo_solve(
    kcols: "_ColumnKernel",
    y: np.ndarray,
    p: np.ndarray,
    c_upper: np.ndarray,
    alpha: np.ndarray,
    tol: float = 1e-3,
    max_iter: int | None = None,
):
    """Run SMO from a feasible start point; returns (alpha, gradient, n_iter)."""
    n = y.shape[0]
    if max_iter is None:
        max_iter = max(200_000, 200 * n)
    if kcols.dense is not None:
        alpha, grad, it, converged = smo_dense(
            np.ascontiguousarray(kcols.dense),
            np.ascontiguousarray(y, dtype=np.float64),
            np.ascontiguousarray(p, dtype=np.float64),
            np.ascontiguousarray(c_upper, dtype=np.float64),
            np.ascontiguousarray(alpha, dtype=np.float64),
            tol,
            max_iter,
        )
        if not converged:
            raise ConvergenceError(f"SMO did not reach tol={tol} within {max_iter} iterations")
        return alpha, grad, it
    kd = kcols.diag()
    qd = kd  # y_i^2 = 1
    alpha = alpha.astype(np.float64).copy()

    # gradient of the dual objective: G = Q a + p
    grad = p.astype(np.float64).copy()
    for i in np.flatnonzero(alpha != 0.0):
        grad += (alpha[i] * y[i]) * y * kcols.col(i)

    neg_inf = -np.inf
    for it in range(max_iter):
        yg = y * grad
        can_up = ((y > 0) & (alpha < c_upper)) | ((y < 0) & (alpha > 0))
        can_dn = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < c_upper))
        if not can_up.any() or not can_dn.any():
            break
        up_vals = np.where(can_up, -yg, neg_inf)
        i = int(np.argmax(up_vals))
        dn_vals = np.where(can_dn, -yg, np.inf)
        j = int(np.argmin(dn_vals))
        if up_vals[i] - dn_vals[j] < tol:
            break

        qi = y * kcols.col(i) * y[i]
        qj = y * kcols.col(j) * y[j]
        old_i, old_j = alpha[i], alpha[j]
        ci, cj = c_upper[i], c_upper[j]
        if y[i] != y[j]:
            quad = max(qd[i] + qd[j] + 2.0 * qi[j], _TAU)
            delta = (-grad[i] - grad[j]) / quad
            diff = alpha[i] - alpha[j]
            alpha[i] += delta
            alpha[j] += delta
            if diff > 0:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = diff
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = -diff
            if diff > ci - cj:
                if alpha[i] > ci:
                    alpha[i] = ci
                    alpha[j] = ci - diff
            else:
                if alpha[j] > cj:
                    alpha[j] = cj
                    alpha[i] = cj + diff
        else:
            quad = max(qd[i] + qd[j] - 2.0 * qi[j], _TAU)
            delta = (grad[i] - grad[j]) / quad
            total = alpha[i] + alpha[j]
            alpha[i] -= delta
            alpha[j] += delta
            if total > ci:
                if alpha[i] > ci:
                    alpha[i] = ci
                    alpha[j] = total - ci
            else:
                if alpha[j] < 0:
                    alpha[j] = 0.0
                    alpha[i] = total
            if total > cj:
                if alpha[j] > cj:
                    alpha[j] = cj
                    alpha[i] = total - cj
            else:
                if alpha[i] < 0:
                    alpha[i] = 0.0
                    alpha[j] = total
        grad += qi * (alpha[i] - old_i) + qj * (alpha[j] - old_j)
    else:
        raise ConvergenceError(f"SMO did not reach tol={tol} within {max_iter} iterations")
    return alpha, grad, it


def _rho_from_kkt(alpha, grad, y, c_upper) -> float:
    """Intercept from KKT conditions (mean over free vectors, else bound midpoint)."""
    yg = y * grad
    free = (alpha > 0) & (alpha < c_upper)
    if free.any():
        return float(yg[free].mean())
    ub = np.inf
    lb = -np.inf
    at_c = alpha >= c_upper
    at_0 = alpha <= 0
    hi = ((y < 0) & at_c) | ((y > 0) & at_0)
    lo = ((y > 0) & at_c) | ((y < 0) & at_0)
    if hi.any():
        ub = float(yg[hi].min())
    if lo.any():
        lb = float(yg[lo].max())
    if np.isinf(ub) and np.isinf(lb):
        return 0.0
    if np.isinf(ub):
        return lb
    if np.isinf(lb):
        return ub
    return (ub + lb) / 2.0


class _SvmScorer:
    """Decision-value scorer over the support vectors.

    ``sign`` multiplies the decision value: -1 for the one-class detector
    (margin interior scores low), +1 for the two-class detector (faulty
    side is already positive).
    """

    def __init__(self, sv, coef, rho, kernel, sign, alpha, y, c_upper, grad):
        self.sv = sv
        self.coef = coef  # alpha_i * y_i of the support vectors
        self.rho = rho
        self.kernel = kernel
        self.sign = sign
        # solver state kept for feasibility inspection
        self.alpha = alpha
        self.y = y
        self.c_upper = c_upper
        self.grad = grad

    def decision_values(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape[0])
        step = max(1, (1 << 23) // max(1, self.sv.shape[0]))
        for s in range(0, X.shape[0], step):
            out[s : s + step] = self.kernel(X[s : s + step], self.sv) @ self.coef
        return out - self.rho

    def score(self, X: np.ndarray) -> np.ndarray:
        return self.sign * self.decision_values(X)

    @property
    def constraint_total(self) -> float:
        return float(np.dot(self.alpha, self.y))


def _finish(X, alpha, grad, y, c_upper, kernel, sign):
    rho = _rho_from_kkt(alpha, grad, y, c_upper)
    sv = alpha > 0
    if not sv.any():
        # degenerate but valid: decision value is the constant -rho
        return _SvmScorer(X[:1], np.zeros(1), rho, kernel, sign, alpha, y, c_upper, grad)
    return _SvmScorer(X[sv], (alpha * y)[sv], rho, kernel, sign, alpha, y, c_upper, grad)


def fit_ocsvm(X: np.ndarray, y: np.ndarray, hp: dict) -> _SvmScorer:
    n = X.shape[0]
    nu = float(hp.get("nu", 0.5))
    if not 0.0 < nu <= 1.0:
        raise FitError("ocsvm", hp, f"nu must be in (0, 1], got {nu}")
    try:
        gamma = resolve_gamma(hp.get("gamma", "scale"), X)
        kernel = kernel_function(hp.get("kernel", "rbf"), gamma)
    except ValueError as exc:
        raise FitError("ocsvm", hp, str(exc))

    ones = np.ones(n)
    alpha0 = np.zeros(n)
    budget = nu * n
    full = int(np.floor(budget))
    alpha0[:full] = 1.0
    if full < n:
        alpha0[full] = budget - full
    try:
        alpha, grad, _ = smo_solve(
            _ColumnKernel(X, kernel), ones, np.zeros(n), np.ones(n), alpha0
        )
    except ConvergenceError as exc:
        raise FitError("ocsvm", hp, str(exc))
    return _finish(X, alpha, grad, ones, np.ones(n), kernel, -1.0)


def fit_svc(X: np.ndarray, y: np.ndarray, hp: dict) -> _SvmScorer:
    labels = np.where(np.asarray(y) == 1, 1.0, -1.0)
    n = X.shape[0]
    n_pos = int(np.sum(labels > 0))
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise FitError("svm", hp, "both classes required")
    c = float(hp.get("c", 1.0))
    if c <= 0:
        raise FitError("svm", hp, f"c must be positive, got {c}")
    try:
        gamma = resolve_gamma(hp.get("gamma", "scale"), X)
        kernel = kernel_function(hp.get("kernel", "rbf"), gamma)
    except ValueError as exc:
        raise FitError("svm", hp, str(exc))

    # "balanced": weight inverse to class frequency
    w_pos = n / (2.0 * n_pos)
    w_neg = n / (2.0 * n_neg)
    c_upper = np.where(labels > 0, c * w_pos, c * w_neg)
    try:
        alpha, grad, _ = smo_solve(
            _ColumnKernel(X, kernel), labels, -np.ones(n), c_upper, np.zeros(n)
        )
    except ConvergenceError as exc:
        raise FitError("svm", hp, str(exc))
    return _finish(X, alpha, grad, labels, c_upper, kernel, 1.0)
