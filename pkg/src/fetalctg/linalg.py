"""Dense symmetric kernels: cyclic Jacobi eigensolver and Cholesky solves."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, NotPositiveDefiniteError, SchemaError

MAX_SWEEPS = 100


@dataclass(frozen=True)
class EigenDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, unit norm


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SchemaError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise SchemaError("matrix has non-finite entries")
    return a


def _check_symmetric(a: np.ndarray, rtol: float = 1e-10) -> None:
    scale = max(np.abs(a).max(), 1.0) if a.size else 1.0
    if np.abs(a - a.T).max(initial=0.0) > rtol * scale:
        raise SchemaError("matrix is not symmetric")


def inf_norm(a: np.ndarray) -> float:
    """Maximum absolute row sum."""
    a = np.atleast_2d(a)
    return float(np.abs(a).sum(axis=1).max(initial=0.0))


def sym_eigen(a, tol: float = 1e-10) -> EigenDecomposition:
    """Eigen-decompose a symmetric matrix with cyclic Jacobi rotations.

    Sweeps over every off-diagonal pair until the largest off-diagonal
    magnitude falls below ``tol * ||a||_inf / 100`` (or 100 sweeps). The
    returned eigenvalues are descending; each eigenvector column has its
    largest-magnitude entry made non-negative.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = _as_square(a)
    _check_symmetric(a)
    n = a.shape[0]
    norm = inf_norm(a)
    work = 0.5 * (a + a.T)
    v = np.eye(n)
    threshold = 0.01 * tol * norm

    sweeps = 0
    while n > 1:
        off = np.abs(work - np.diag(np.diag(work))).max()
        if off <= threshold or off == 0.0:
            break
        if sweeps >= MAX_SWEEPS:
            raise ConvergenceError(
                f"Jacobi did not converge in {MAX_SWEEPS} sweeps", residual=float(off)
            )
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = work[p, q]
                if apq == 0.0:
                    continue
                theta = (work[q, q] - work[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J applied to rows/cols p and q
                row_p = work[p, :].copy()
                row_q = work[q, :].copy()
                work[p, :] = c * row_p - s * row_q
                work[q, :] = s * row_p + c * row_q
                col_p = work[:, p].copy()
                col_q = work[:, q].copy()
                work[:, p] = c * col_p - s * col_q
                work[:, q] = s * col_p + c * col_q
                work[p, q] = work[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    values = np.diag(work).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    v = v[:, order]
    v /= np.linalg.norm(v, axis=0, keepdims=True)
    for j in range(n):
        k = np.argmax(np.abs(v[:, j]))
        if v[k, j] < 0:
            v[:, j] = -v[:, j]

    residual = np.abs(a @ v - v * values).max(initial=0.0)
    if residual > tol * max(norm, np.finfo(float).tiny):
        raise ConvergenceError(
            f"eigen residual {residual:.3e} exceeds tolerance", residual=float(residual)
        )
    return EigenDecomposition(values, v)


def cholesky(a) -> np.ndarray:
    """Lower-triangular L with L @ L.T == a."""
    a = _as_square(a)
    _check_symmetric(a)
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if not pivot > 0.0:
            raise NotPositiveDefiniteError(f"non-positive pivot {pivot:.3e} at column {j}")
        low[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            low[j + 1 :, j] = (a[j + 1 :, j] - low[j + 1 :, :j] @ low[j, :j]) / low[j, j]
    return low


def solve_lower(low: np.ndarray, b) -> np.ndarray:
    """Forward substitution; ``b`` may be a vector or a matrix of columns."""
    b = np.array(b, dtype=np.float64)
    x = np.zeros_like(b)
    for i in range(low.shape[0]):
        x[i] = (b[i] - low[i, :i] @ x[:i]) / low[i, i]
    return x


def solve_upper(up: np.ndarray, b) -> np.ndarray:
    b = np.array(b, dtype=np.float64)
    x = np.zeros_like(b)
    n = up.shape[0]
    for i in range(n - 1, -1, -1):
        x[i] = (b[i] - up[i, i + 1 :] @ x[i + 1 :]) / up[i, i]
    return x


def spd_solve(a, b) -> np.ndarray:
    """Solve a @ x = b for symmetric positive-definite ``a`` via Cholesky.

    Raises NotPositiveDefiniteError on a non-positive pivot so the caller can
    add a ridge and retry.
    """
    low = cholesky(a)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != low.shape[0]:
        raise SchemaError(f"rhs length {b.shape[0]} does not match matrix size {low.shape[0]}")
    return solve_upper(low.T, solve_lower(low, b))
