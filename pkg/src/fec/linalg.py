"""Dense vector/matrix helpers: distances, PCA projection, row means.

Matrices are plain 2-D float64 numpy arrays. Public operations validate
shape and finiteness on entry so downstream numerics never see NaN/Inf.
"""

from __future__ import annotations

from enum import Enum

import numpy as np


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap before converging."""


class Metric(Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"

    @classmethod
    def parse(cls, name: str) -> "Metric":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown metric {name!r}; expected 'euclidean' or 'cosine'") from None


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    m = np.asarray(x, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values")
    return m


def as_vector(x, name: str = "vector") -> np.ndarray:
    v = np.asarray(x, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite values")
    return v


def distance(u, v, metric: Metric) -> float:
    """Distance between two vectors; cosine rejects zero-norm inputs."""
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    if metric is Metric.EUCLIDEAN:
        return float(np.linalg.norm(u - v))
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine distance undefined for zero-norm vector")
    c = float(np.dot(u, v) / (nu * nv))
    return 1.0 - max(-1.0, min(1.0, c))


def distances_to_centers(X: np.ndarray, centers: np.ndarray, metric: Metric) -> np.ndarray:
    """N x K matrix of distances from each row of X to each center row."""
    X = as_matrix(X, "X")
    centers = as_matrix(centers, "centers")
    if X.shape[1] != centers.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {centers.shape[1]}")
    if metric is Metric.EUCLIDEAN:
        sq = (
            np.sum(X * X, axis=1)[:, None]
            + np.sum(centers * centers, axis=1)[None, :]
            - 2.0 * (X @ centers.T)
        )
        return np.sqrt(np.maximum(sq, 0.0))
    xn = np.linalg.norm(X, axis=1)
    cn = np.linalg.norm(centers, axis=1)
    if np.any(xn == 0.0) or np.any(cn == 0.0):
        raise ValueError("cosine distance undefined for zero-norm vector")
    cos = (X / xn[:, None]) @ (centers / cn[:, None]).T
    return 1.0 - np.clip(cos, -1.0, 1.0)


def row_mean(X, subset) -> np.ndarray:
    """Arithmetic mean of the selected rows."""
    X = as_matrix(X, "X")
    idx = np.asarray(list(subset), dtype=np.int64)
    if idx.size == 0:
        raise ValueError("row_mean of empty subset")
    if idx.min() < 0 or idx.max() >= X.shape[0]:
        raise ValueError("row index out of range")
    return X[idx].mean(axis=0)


def pca_project(X, dims: int) -> np.ndarray:
    """Project rows of X onto the top principal components.

    Components are eigenvectors of the sample covariance of the
    mean-centered data, ordered by descending eigenvalue; the raw rows are
    projected onto them without re-centering, so a full-rank projection is
    a pure rotation (cosine geometry survives, not just distances). Each
    component's sign is fixed so its largest-magnitude coordinate is
    positive, making the projection deterministic.
    """
    X = as_matrix(X, "X")
    n, d = X.shape
    if n < 2:
        raise ValueError("pca_project requires at least 2 rows")
    if not 1 <= dims <= min(n, d):
        raise ValueError(f"dims must be in [1, {min(n, d)}], got {dims}")
    centered = X - X.mean(axis=0)
    cov = (centered.T @ centered) / (n - 1)
    try:
        evals, evecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(f"covariance eigensolve failed: {e}") from e
    order = np.argsort(evals)[::-1][:dims]
    components = evecs[:, order]
    for j in range(components.shape[1]):
        col = components[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            components[:, j] = -col
    return X @ components
