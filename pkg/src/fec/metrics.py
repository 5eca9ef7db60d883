"""External clustering-quality indices: ARI, NMI, and selection accuracy.

Both indices are permutation invariant. NMI uses natural logs and
normalizes mutual information by the arithmetic mean of the two label
entropies; that choice is recorded in run metadata so reported numbers
are comparable across runs.
"""

from __future__ import annotations

import numpy as np

NMI_NORMALIZATION = "arithmetic"


def _as_labels(x, name: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.int64)
    if a.ndim != 1:
        raise ValueError(f"{name} must be a 1-D label vector")
    return a


def _check_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = _as_labels(a, "a")
    b = _as_labels(b, "b")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 2:
        raise ValueError("label vectors must have length >= 2")
    return a, b


def canonical_labels(labels) -> tuple[int, ...]:
    """Relabel clusters by order of first appearance (canonical form)."""
    mapping: dict[int, int] = {}
    out = []
    for raw in np.asarray(labels).tolist():
        if raw not in mapping:
            mapping[raw] = len(mapping)
        out.append(mapping[raw])
    return tuple(out)


def same_partition(a, b) -> bool:
    """True when two label vectors describe the same partition."""
    return canonical_labels(a) == canonical_labels(b)


def _contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def ari(a, b) -> float:
    """Adjusted Rand Index in [-1, 1]; 1 iff the partitions are equal.

    When the expected index equals the maximum index (e.g. one side is a
    single cluster, or both sides are all singletons) the adjusted ratio
    is 0/0; by convention the result is 1.0 for equal partitions and 0.0
    otherwise.
    """
    a, b = _check_pair(a, b)
    table = _contingency(a, b)
    n = a.shape[0]

    def comb2(x):
        return x * (x - 1) // 2

    index = int(np.sum(comb2(table)))
    sum_a = int(np.sum(comb2(table.sum(axis=1))))
    sum_b = int(np.sum(comb2(table.sum(axis=0))))
    total = comb2(n)
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2.0
    if max_index == expected:
        return 1.0 if same_partition(a, b) else 0.0
    return float((index - expected) / (max_index - expected))


def nmi(a, b) -> float:
    """Normalized mutual information in [0, 1] (arithmetic-mean norm).

    Returns 1.0 by convention when both partitions are single-cluster
    (zero entropy on both sides).
    """
    a, b = _check_pair(a, b)
    table = _contingency(a, b).astype(np.float64)
    n = float(a.shape[0])
    pa = table.sum(axis=1) / n
    pb = table.sum(axis=0) / n
    ha = -np.sum(pa * np.log(pa))
    hb = -np.sum(pb * np.log(pb))
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if same_partition(a, b):
        # identical partitions score exactly 1; the float MI would land at
        # 1 - O(eps) and break the "1 iff equal" contract
        return 1.0
    pij = table / n
    mask = pij > 0
    outer = pa[:, None] * pb[None, :]
    mi = float(np.sum(pij[mask] * np.log(pij[mask] / outer[mask])))
    value = mi / ((ha + hb) / 2.0)
    return float(min(1.0, max(0.0, value)))


def selection_accuracy(results) -> float:
    """Fraction of episodes whose chosen assignment equals the truth.

    Each result must expose `chosen` and `truth` label vectors (anything
    with a `.labels` attribute, or a raw label sequence). Comparison is
    as partitions, so label permutations do not matter.
    """
    results = list(results)
    if not results:
        raise ValueError("selection_accuracy of empty result list")
    correct = 0
    for r in results:
        chosen = getattr(r, "chosen", None)
        truth = getattr(r, "truth", None)
        if chosen is None or truth is None:
            raise ValueError("result lacks chosen or ground-truth assignment")
        chosen = getattr(chosen, "labels", chosen)
        truth = getattr(truth, "labels", truth)
        correct += same_partition(chosen, truth)
    return correct / len(results)
