"""PCA and LDA projections built on the Jacobi eigensolver."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .errors import DegenerateError, NotPositiveDefiniteError, NumericError, SchemaError

logger = logging.getLogger(__name__)

DEFAULT_PCA_VARIANCE = 0.95
DEFAULT_LDA_COMPONENTS = 2


@dataclass(frozen=True)
class Projection:
    kind: str  # "pca" or "lda"
    mean: np.ndarray
    components: np.ndarray  # (d, k), columns are directions
    explained: np.ndarray  # PCA: variance fractions; LDA: discriminant eigenvalues

    @property
    def k(self) -> int:
        return self.components.shape[1]

    def to_text(self) -> str:
        """Plain-text dump: kind, k, mean, then components column by column."""
        lines = [f"kind {self.kind}", f"dim {self.mean.shape[0]}", f"k {self.k}",
                 "mean " + " ".join(repr(float(v)) for v in self.mean),
                 "explained " + " ".join(repr(float(v)) for v in self.explained)]
        for j in range(self.k):
            lines.append(f"component {j} " + " ".join(repr(float(v)) for v in self.components[:, j]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Projection":
        fields = {}
        comps = []
        for line in text.strip().splitlines():
            key, _, rest = line.partition(" ")
            if key == "component":
                comps.append([float(v) for v in rest.split()[1:]])
            else:
                fields[key] = rest
        mean = np.array([float(v) for v in fields["mean"].split()])
        explained = np.array([float(v) for v in fields["explained"].split()])
        components = np.array(comps).T.reshape(mean.shape[0], int(fields["k"]))
        return cls(fields["kind"], mean, components, explained)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _matrix(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise SchemaError(f"expected a 2-D feature matrix, got shape {x.shape}")
    return x


def pca_fit(x, k=DEFAULT_PCA_VARIANCE) -> Projection:
    """Principal components of the sample covariance.

    ``k`` is either an integer component count or a float variance target in
    (0, 1]; with a target, the smallest k reaching it is kept.
    """
    x = _matrix(x)
    n, d = x.shape
    if n < 2:
        raise DegenerateError("PCA needs at least two rows")
    if isinstance(k, (int, np.integer)) and not isinstance(k, bool):
        if not 1 <= k <= d:
            raise ValueError(f"component count must be in [1, {d}], got {k}")
        target = None
    else:
        target = float(k)
        if not 0.0 < target <= 1.0:
            raise ValueError(f"variance target must be in (0, 1], got {k}")

    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    eig = linalg.sym_eigen(cov, tol=1e-10)
    values = np.clip(eig.eigenvalues, 0.0, None)
    total = values.sum()
    fractions = values / total if total > 0 else np.full(d, 1.0 / d)
    if target is not None:
        cumulative = np.cumsum(fractions)
        k = int(np.searchsorted(cumulative, target - 1e-12) + 1)
        k = min(k, d)
    return Projection("pca", mean, eig.eigenvectors[:, :k].copy(), fractions[:k].copy())


def scatter_matrices(x, y):
    """Within-class and class-size-weighted between-class scatter (sums, not averages)."""
    x = _matrix(x)
    y = np.asarray(y)
    mean = x.mean(axis=0)
    d = x.shape[1]
    s_w = np.zeros((d, d))
    s_b = np.zeros((d, d))
    for c in np.unique(y):
        xc = x[y == c]
        mu = xc.mean(axis=0)
        centered = xc - mu
        s_w += centered.T @ centered
        diff = (mu - mean)[:, None]
        s_b += xc.shape[0] * (diff @ diff.T)
    return s_w, s_b


def lda_fit(x, y, k: int = DEFAULT_LDA_COMPONENTS) -> Projection:
    """Fisher discriminant directions via Cholesky whitening of the within-class scatter.

    Whitening uses S_w directly; if its factorization fails a ridge of
    1e-6 * trace(S_w) / d is added and the factorization retried.
    """
    x = _matrix(x)
    y = np.asarray(y)
    if y.shape != (x.shape[0],):
        raise SchemaError("labels and features disagree on row count")
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise DegenerateError("LDA needs at least two classes")
    if (counts < 2).any():
        raise DegenerateError(f"class {classes[counts < 2][0]} has fewer than 2 samples")
    if x.shape[0] <= classes.size:
        raise DegenerateError("LDA needs more rows than classes")
    if not 1 <= k <= classes.size - 1:
        raise ValueError(f"LDA keeps between 1 and {classes.size - 1} components, got {k}")

    d = x.shape[1]
    s_w, s_b = scatter_matrices(x, y)
    try:
        low = linalg.cholesky(s_w)
    except NotPositiveDefiniteError:
        ridge = 1e-6 * np.trace(s_w) / d
        logger.warning("within-class scatter singular; adding ridge %.3e", ridge)
        try:
            low = linalg.cholesky(s_w + ridge * np.eye(d))
        except NotPositiveDefiniteError as exc:
            raise NumericError(f"within-class scatter whitening failed: {exc}") from exc

    # M = L^-1 S_b L^-T is symmetric with the same spectrum as S_w^-1 S_b
    half = linalg.solve_lower(low, s_b)
    whitened = linalg.solve_lower(low, half.T)
    whitened = 0.5 * (whitened + whitened.T)
    eig = linalg.sym_eigen(whitened, tol=1e-10)
    directions = linalg.solve_upper(low.T, eig.eigenvectors[:, :k])
    directions /= np.linalg.norm(directions, axis=0, keepdims=True)
    for j in range(k):
        i = np.argmax(np.abs(directions[:, j]))
        if directions[i, j] < 0:
            directions[:, j] = -directions[:, j]
    return Projection("lda", x.mean(axis=0), directions, eig.eigenvalues[:k].copy())


def project(p: Projection, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != p.mean.shape[0]:
        raise SchemaError(f"projection expects {p.mean.shape[0]} columns, got {x.shape[-1]}")
    return (x - p.mean) @ p.components


def inverse_project(p: Projection, z) -> np.ndarray:
    """Map reduced coordinates back to feature space (exact only for full-rank PCA)."""
    return np.asarray(z) @ p.components.T + p.mean


def fit_reducer(kind: str, x, y, **options) -> Projection:
    if kind == "pca":
        return pca_fit(x, options.get("pca_components", DEFAULT_PCA_VARIANCE))
    if kind == "lda":
        return lda_fit(x, y, options.get("lda_components", DEFAULT_LDA_COMPONENTS))
    raise ValueError(f"unknown reducer {kind!r}")
