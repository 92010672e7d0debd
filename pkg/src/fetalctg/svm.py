"""Kernel SVM trained with sequential minimal optimization, one-vs-one for multiclass."""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError

logger = logging.getLogger(__name__)

TAU = 1e-12


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "rbf"
    gamma: float | None = None  # None on an rbf kernel means "scale" until resolved

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel {self.kind!r}")
        if self.kind == "rbf" and self.gamma is not None and not self.gamma > 0:
            raise ValueError("rbf gamma must be positive")

    def matrix(self, a, b) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=np.float64))
        b = np.atleast_2d(np.asarray(b, dtype=np.float64))
        if a.shape[1] != b.shape[1]:
            raise SchemaError(f"kernel inputs have dimensions {a.shape[1]} and {b.shape[1]}")
        dots = a @ b.T
        if self.kind == "linear":
            return dots
        if self.gamma is None:
            raise ValueError("rbf gamma not resolved")
        sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * dots
        return np.exp(-self.gamma * np.maximum(sq, 0.0))


def kernel_eval(k: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise SchemaError(f"kernel inputs have shapes {a.shape} and {b.shape}")
    if k.kind == "linear":
        return float(a @ b)
    diff = a - b
    return float(np.exp(-k.gamma * (diff @ diff)))


def scale_gamma(x) -> float:
    """1 / (n_features * variance of all feature entries)."""
    x = np.asarray(x, dtype=np.float64)
    var = x.var()
    return 1.0 / (x.shape[1] * var) if var > 0 else 1.0


@dataclass(frozen=True)
class BinarySvm:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    kernel: KernelSpec
    support_indices: np.ndarray | None = None  # rows of the training matrix
    iterations: int = 0
    converged: bool = True
    objective_trace: tuple = field(default=(), repr=False)

    def decision_function(self, x) -> np.ndarray:
        return self.kernel.matrix(x, self.support_vectors) @ self.dual_coef + self.bias


def _violation_sets(alpha, y, c):
    up = ((y > 0) & (alpha < c)) | ((y < 0) & (alpha > 0))
    low = ((y < 0) & (alpha < c)) | ((y > 0) & (alpha > 0))
    return up, low


def _snap(a: float, c: float) -> float:
    eps = 1e-12 * c
    if a <= eps:
        return 0.0
    if a >= c - eps:
        return c
    return a


def smo_train_binary(x, y, k: KernelSpec, c: float = 1.0, tol: float = 1e-3,
                     max_iter: int | None = None, record_objective: bool = False) -> BinarySvm:
    """Solve the soft-margin dual for labels y in {-1, +1}.

    Each iteration picks the maximal violating pair: the index with the
    largest -y*grad among those free to move up and the one with the smallest
    among those free to move down (equivalently the pair with the largest
    error gap). It stops once that gap is at most ``tol``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise SchemaError("x must be (n, d) with one label per row")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("binary labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("both labels must be present")
    if c <= 0 or tol <= 0:
        raise ValueError("c and tol must be positive")
    if k.kind == "rbf" and k.gamma is None:
        k = KernelSpec("rbf", scale_gamma(x))

    n = x.shape[0]
    if max_iter is None:
        max_iter = max(10_000, 100 * n)
    kmat = k.matrix(x, x)
    diag = np.diag(kmat).copy()
    alpha = np.zeros(n)
    grad = -np.ones(n)
    objective = [] if record_objective else None

    it = 0
    converged = False
    while True:
        up, low = _violation_sets(alpha, y, c)
        score = -y * grad
        i = int(np.argmax(np.where(up, score, -np.inf)))
        j = int(np.argmin(np.where(low, score, np.inf)))
        gap = score[i] - score[j]
        if not (up.any() and low.any()) or gap <= tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        # errors E_t = y_t * grad_t (bias cancels in E_i - E_j)
        e_i, e_j = y[i] * grad[i], y[j] * grad[j]
        eta = diag[i] + diag[j] - 2.0 * kmat[i, j]
        if eta <= TAU:
            eta = TAU
        if y[i] != y[j]:
            lo, hi = max(0.0, alpha[j] - alpha[i]), min(c, c + alpha[j] - alpha[i])
        else:
            lo, hi = max(0.0, alpha[i] + alpha[j] - c), min(c, alpha[i] + alpha[j])
        a_j = min(max(alpha[j] + y[j] * (e_i - e_j) / eta, lo), hi)
        a_i = alpha[i] + y[i] * y[j] * (alpha[j] - a_j)
        # snap to the box so rounding cannot leave an index "free" with no room to move
        a_i, a_j = _snap(a_i, c), _snap(a_j, c)
        d_i, d_j = a_i - alpha[i], a_j - alpha[j]
        alpha[i], alpha[j] = a_i, a_j
        # grad += Q[:, i] d_i + Q[:, j] d_j with Q = yy' * K
        grad += y * (kmat[:, i] * (y[i] * d_i) + kmat[:, j] * (y[j] * d_j))
        if objective is not None:
            objective.append(float(alpha.sum() - 0.5 * (alpha * y) @ kmat @ (alpha * y)))

    if not converged:
        up, low = _violation_sets(alpha, y, c)
        score = -y * grad
        m, big_m = score[up].max(), score[low].min()
        violators = int(np.sum(up & (score > big_m + tol)) + np.sum(low & (score < m - tol)))
        warnings.warn(f"SMO hit the iteration cap ({max_iter}) with {violators} KKT violators",
                      ConvergenceWarning, stacklevel=2)

    score = -y * grad
    free = (alpha > 0) & (alpha < c)
    if free.any():
        bias = float(score[free].mean())
    else:
        up, low = _violation_sets(alpha, y, c)
        bias = float(0.5 * (score[up].max(initial=-np.inf) + score[low].min(initial=np.inf)))
        if not np.isfinite(bias):
            bias = 0.0

    sv = alpha > 0
    if not sv.any():
        sv = np.ones(n, dtype=bool)
    return BinarySvm(
        support_vectors=x[sv].copy(),
        dual_coef=(alpha * y)[sv],
        bias=bias,
        kernel=k,
        support_indices=np.flatnonzero(sv),
        iterations=it,
        converged=converged,
        objective_trace=tuple(objective) if objective is not None else (),
    )


@dataclass(frozen=True)
class SvmModel:
    classes: tuple
    machines: dict  # (class_a, class_b) -> BinarySvm, +1 means class_a

    def decision_votes(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        votes = np.zeros((x.shape[0], len(self.classes)), dtype=np.int64)
        index = {c: i for i, c in enumerate(self.classes)}
        for (a, b), machine in self.machines.items():
            positive = machine.decision_function(x) > 0
            votes[positive, index[a]] += 1
            votes[~positive, index[b]] += 1
        return votes

    def predict(self, x) -> np.ndarray:
        votes = self.decision_votes(x)
        # argmax returns the first maximum, i.e. the lowest class on ties
        return np.asarray(self.classes)[np.argmax(votes, axis=1)]


def svm_fit(x, y, k: KernelSpec | None = None, c: float = 1.0, tol: float = 1e-3) -> SvmModel:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    classes = tuple(int(v) for v in np.unique(y))
    if len(classes) < 2:
        raise ValueError("svm_fit needs at least two classes")
    k = k or KernelSpec("rbf")
    if k.kind == "rbf" and k.gamma is None:
        k = KernelSpec("rbf", scale_gamma(x))
    machines = {}
    for a, b in itertools.combinations(classes, 2):
        mask = (y == a) | (y == b)
        yy = np.where(y[mask] == a, 1.0, -1.0)
        machines[(a, b)] = smo_train_binary(x[mask], yy, k, c=c, tol=tol)
    return SvmModel(classes, machines)


def svm_predict(m: SvmModel, x) -> np.ndarray:
    return m.predict(x)
