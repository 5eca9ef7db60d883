"""Candidate-generating clustering: K-means, Sinkhorn K-means, enumeration.

Sinkhorn K-means treats the assignment step as an entropy-regularized
transport problem with uniform row marginals 1/N and column marginals
1/K, solved by alternate scaling in the log domain, then rounds the plan
to a hard, exactly balanced partition.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .linalg import ConvergenceError, Metric, as_matrix, distances_to_centers
from .metrics import canonical_labels
from .rng import SplitMix64

LLOYD_MAX_ROUNDS = 100
SINKHORN_MAX_ITERS = 1000
SINKHORN_TOL = 1e-8
ENUMERATION_CAP = 12


@dataclass(frozen=True)
class ClusterAssignment:
    """A hard partition in canonical form (clusters indexed by first appearance)."""

    labels: tuple[int, ...]
    k: int
    sizes: tuple[int, ...]

    @staticmethod
    def from_labels(labels) -> "ClusterAssignment":
        canon = canonical_labels(labels)
        if not canon:
            raise ValueError("assignment must cover at least one example")
        k = max(canon) + 1
        counts = [0] * k
        for l in canon:
            counts[l] += 1
        return ClusterAssignment(labels=canon, k=k, sizes=tuple(counts))

    @property
    def n(self) -> int:
        return len(self.labels)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.labels, dtype=np.int64)

    def members(self, cluster: int) -> list[int]:
        return [i for i, l in enumerate(self.labels) if l == cluster]


@dataclass
class SoftAssignment:
    """N x K transport plan with row sums 1/N and column sums 1/K."""

    plan: np.ndarray
    gamma: float

    def marginal_violation(self) -> float:
        n, k = self.plan.shape
        row = np.max(np.abs(self.plan.sum(axis=1) - 1.0 / n))
        col = np.max(np.abs(self.plan.sum(axis=0) - 1.0 / k))
        return float(max(row, col))


def _features(X) -> np.ndarray:
    return as_matrix(getattr(X, "features", X), "X")


def _seed_centers(X: np.ndarray, k: int, metric: Metric, rng: SplitMix64) -> np.ndarray:
    """Farthest-point seeding: random first center, then argmax of the
    distance to the nearest already-chosen center."""
    n = X.shape[0]
    chosen = [rng.randint(n)]
    min_dist = distances_to_centers(X, X[chosen[-1]][None, :], metric)[:, 0]
    while len(chosen) < k:
        min_dist[chosen] = -1.0  # never re-pick a chosen point
        nxt = int(np.argmax(min_dist))
        chosen.append(nxt)
        d = distances_to_centers(X, X[nxt][None, :], metric)[:, 0]
        min_dist = np.minimum(min_dist, d)
    return X[chosen].copy()


def _group_means(X: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    centers = np.zeros((k, X.shape[1]))
    np.add.at(centers, labels, X)
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    counts[counts == 0] = 1.0
    return centers / counts[:, None]


def _repair_empty(labels: np.ndarray, X: np.ndarray, centers: np.ndarray, k: int, metric: Metric) -> np.ndarray:
    """Move the point farthest from its own center into each empty cluster."""
    labels = labels.copy()
    for empty in range(k):
        counts = np.bincount(labels, minlength=k)
        if counts[empty] > 0:
            continue
        dist_own = distances_to_centers(X, centers, metric)[np.arange(len(labels)), labels]
        # only steal from clusters that keep at least one member
        movable = counts[labels] > 1
        if not np.any(movable):
            raise ValueError("cannot repair empty cluster: no movable points")
        dist_own[~movable] = -np.inf
        labels[int(np.argmax(dist_own))] = empty
    return labels


def _lloyd(X: np.ndarray, k: int, metric: Metric, rng: SplitMix64) -> tuple[np.ndarray, list[float]]:
    centers = _seed_centers(X, k, metric, rng)
    labels = None
    objectives: list[float] = []
    for _ in range(LLOYD_MAX_ROUNDS):
        dists = distances_to_centers(X, centers, metric)
        new_labels = np.argmin(dists, axis=1)
        new_labels = _repair_empty(new_labels, X, centers, k, metric)
        centers = _group_means(X, new_labels, k)
        objectives.append(
            float(distances_to_centers(X, centers, metric)[np.arange(len(new_labels)), new_labels].sum())
        )
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, objectives


def kmeans(X, k: int, metric: Metric = Metric.EUCLIDEAN, seed: int = 0) -> ClusterAssignment:
    """Lloyd K-means with farthest-point seeding and empty-cluster repair."""
    X = _features(X)
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k must be in [1, {X.shape[0]}], got {k}")
    labels, _ = _lloyd(X, k, metric, SplitMix64(seed))
    return ClusterAssignment.from_labels(labels)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    return (m + np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True))).squeeze(axis)


def sinkhorn_plan(
    cost,
    gamma: float,
    tol: float = SINKHORN_TOL,
    max_iters: int = SINKHORN_MAX_ITERS,
) -> SoftAssignment:
    """Entropy-regularized balanced transport plan for a cost matrix.

    Alternates log-domain scaling of the kernel exp(-cost/gamma) until
    row sums match 1/N and column sums match 1/K within tol. Raises
    ConvergenceError (reporting the final violation) when the iteration
    cap is hit first.
    """
    cost = as_matrix(cost, "cost")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    n, k = cost.shape
    log_kernel = -cost / gamma
    log_r = -np.log(n)
    log_c = -np.log(k)
    f = np.zeros(n)
    g = np.zeros(k)
    for _ in range(max_iters):
        f = log_r - _logsumexp(log_kernel + g[None, :], axis=1)
        g = log_c - _logsumexp(log_kernel + f[:, None], axis=0)
        plan = np.exp(log_kernel + f[:, None] + g[None, :])
        soft = SoftAssignment(plan=plan, gamma=gamma)
        if soft.marginal_violation() <= tol:
            return soft
    raise ConvergenceError(
        f"sinkhorn failed to reach tol={tol} in {max_iters} iterations "
        f"(final marginal violation {soft.marginal_violation():.3e})"
    )


def round_to_hard(plan, sizes) -> ClusterAssignment:
    """Greedy rounding of a soft plan to exact cluster sizes.

    Repeatedly assigns the largest remaining plan entry whose row is free
    and whose column has capacity; ties break toward the lowest row then
    column index.
    """
    p = plan.plan if isinstance(plan, SoftAssignment) else as_matrix(plan, "plan")
    n, k = p.shape
    sizes = list(sizes)
    if len(sizes) != k or sum(sizes) != n:
        raise ValueError(f"sizes {sizes} incompatible with plan shape {p.shape}")
    entries = sorted(
        ((i, j) for i in range(n) for j in range(k)),
        key=lambda ij: (-p[ij[0], ij[1]], ij[0], ij[1]),
    )
    capacity = sizes[:]
    labels = [-1] * n
    assigned = 0
    for i, j in entries:
        if labels[i] < 0 and capacity[j] > 0:
            labels[i] = j
            capacity[j] -= 1
            assigned += 1
            if assigned == n:
                break
    return ClusterAssignment.from_labels(labels)


def sinkhorn_kmeans(
    X,
    k: int,
    metric: Metric = Metric.COSINE,
    gamma: float = 0.1,
    seed: int = 0,
    tol: float = SINKHORN_TOL,
    max_iters: int = SINKHORN_MAX_ITERS,
) -> ClusterAssignment:
    """Balanced K-means via alternating Sinkhorn assignment and center updates.

    Requires N divisible by k; every returned cluster has exactly N/k
    members. Stops when the hard-rounded assignment repeats (fixed point
    or cycle) or after the round cap.
    """
    X = _features(X)
    n = X.shape[0]
    if k < 1 or n < k:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    if n % k != 0:
        raise ValueError(f"equal-size clustering needs N divisible by k (N={n}, k={k})")
    sizes = [n // k] * k
    centers = _seed_centers(X, k, metric, SplitMix64(seed))
    seen: set[tuple[int, ...]] = set()
    hard = None
    for _ in range(LLOYD_MAX_ROUNDS):
        cost = distances_to_centers(X, centers, metric)
        soft = sinkhorn_plan(cost, gamma, tol=tol, max_iters=max_iters)
        hard = round_to_hard(soft, sizes)
        if hard.labels in seen:
            break
        seen.add(hard.labels)
        weights = soft.plan / soft.plan.sum(axis=0)[None, :]
        centers = weights.T @ X
    return hard


def _partitions(items: tuple[int, ...], sizes: tuple[int, ...]):
    """Distinct partitions of items into unlabeled groups of the given sizes.

    The group containing the smallest remaining item is generated first,
    and for any repeated size only one group slot is considered, so every
    unordered partition appears exactly once.
    """
    if not items:
        yield ()
        return
    head, rest = items[0], items[1:]
    tried: set[int] = set()
    for idx, size in enumerate(sizes):
        if size in tried:
            continue
        tried.add(size)
        for combo in itertools.combinations(rest, size - 1):
            taken = set(combo)
            remaining = tuple(x for x in rest if x not in taken)
            for tail in _partitions(remaining, sizes[:idx] + sizes[idx + 1 :]):
                yield ((head,) + combo,) + tail


def enumerate_assignments(n: int, sizes, max_n: int = ENUMERATION_CAP) -> list[ClusterAssignment]:
    """All distinct partitions of n items into groups of the given sizes."""
    sizes = tuple(int(s) for s in sizes)
    if any(s < 1 for s in sizes):
        raise ValueError("cluster sizes must be positive")
    if sum(sizes) != n:
        raise ValueError(f"sizes {sizes} do not sum to n={n}")
    if n > max_n:
        raise ValueError(f"n={n} above enumeration cap {max_n}")
    out = []
    for groups in _partitions(tuple(range(n)), sizes):
        labels = [0] * n
        for g, group in enumerate(groups):
            for i in group:
                labels[i] = g
        out.append(ClusterAssignment.from_labels(labels))
    return out
