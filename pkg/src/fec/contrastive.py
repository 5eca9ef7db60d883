"""Trainable head, center-softmax contrastive loss, and Adam.

The head is a small linear stack (1 or 2 layers, rectifier in between)
applied to frozen embeddings. The loss pushes each embedded example
toward the center of its assigned cluster and away from the other
centers through a temperature-scaled softmax over negative distances.
Centers are recomputed from the current head output at every step, and
gradients flow through them: pulling one example also drags its cluster
center, which is what couples the clusters.

Gradients are analytic (hand-derived backprop) and are validated against
central finite differences in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterAssignment
from .linalg import Metric, as_matrix
from .rng import SplitMix64

DEFAULT_OUT_DIM = 512
DEFAULT_LEARNING_RATE = 1e-3

LOSS_NEGLOG = "neglog"
LOSS_LITERAL = "literal"


@dataclass
class ContrastiveHead:
    """Linear layers (weights: in x out) with zero biases at init."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    in_dim: int
    out_dim: int
    seed: int

    @property
    def n_layers(self) -> int:
        return len(self.weights)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class AdamState:
    """Bias-corrected Adam accumulators shaped like the head parameters."""

    lr: float
    beta1: float
    beta2: float
    eps: float
    t: int
    m_w: list[np.ndarray]
    v_w: list[np.ndarray]
    m_b: list[np.ndarray]
    v_b: list[np.ndarray]


@dataclass
class LossTrace:
    """Per-step training losses for one (candidate, member) unit."""

    candidate_id: int
    member_id: int
    losses: list[float] = field(default_factory=list)


def init_head(in_dim: int, out_dim: int = DEFAULT_OUT_DIM, n_layers: int = 1, seed: int = 0) -> ContrastiveHead:
    """Fresh head with He-style init: N(0, 2/fan_in) weights, zero biases."""
    if n_layers not in (1, 2):
        raise ValueError(f"n_layers must be 1 or 2, got {n_layers}")
    if in_dim < 1 or out_dim < 1:
        raise ValueError("dimensions must be positive")
    rng = SplitMix64(seed)
    dims = [in_dim] + [out_dim] * n_layers
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(scale * rng.normals(fan_in * fan_out).reshape(fan_in, fan_out))
        biases.append(np.zeros(fan_out))
    return ContrastiveHead(weights=weights, biases=biases, in_dim=in_dim, out_dim=out_dim, seed=seed)


def init_adam(head: ContrastiveHead, lr: float = DEFAULT_LEARNING_RATE) -> AdamState:
    return AdamState(
        lr=lr,
        beta1=0.9,
        beta2=0.999,
        eps=1e-8,
        t=0,
        m_w=[np.zeros_like(w) for w in head.weights],
        v_w=[np.zeros_like(w) for w in head.weights],
        m_b=[np.zeros_like(b) for b in head.biases],
        v_b=[np.zeros_like(b) for b in head.biases],
    )


def _forward_cached(head: ContrastiveHead, X: np.ndarray):
    """Forward pass keeping the pre-activation needed for backprop."""
    if head.n_layers == 1:
        return X @ head.weights[0] + head.biases[0], None
    pre = X @ head.weights[0] + head.biases[0]
    hidden = np.maximum(pre, 0.0)
    return hidden @ head.weights[1] + head.biases[1], (pre, hidden)


def forward(head: ContrastiveHead, X) -> np.ndarray:
    """Embed rows of X through the head."""
    X = as_matrix(X, "X")
    if X.shape[1] != head.in_dim:
        raise ValueError(f"input has {X.shape[1]} columns, head expects {head.in_dim}")
    out, _ = _forward_cached(head, X)
    if not np.all(np.isfinite(out)):
        raise ValueError("head produced non-finite output")
    return out


def _distances_and_partials(Z: np.ndarray, centers: np.ndarray, metric: Metric):
    """Distances d (N x K) plus what the backward pass needs.

    Returns (d, aux) where aux carries metric-specific precomputations.
    """
    if metric is Metric.EUCLIDEAN:
        # explicit differences keep structural zeros (a singleton cluster's
        # member vs its own center) exactly zero, which the expanded
        # x^2 + c^2 - 2xc form would turn into sqrt(rounding noise)
        diff = Z[:, None, :] - centers[None, :, :]
        d = np.sqrt(np.einsum("nkm,nkm->nk", diff, diff))
        return d, diff
    zn = np.linalg.norm(Z, axis=1)
    cn = np.linalg.norm(centers, axis=1)
    if np.any(zn == 0.0):
        raise ValueError("zero-norm embedding under cosine metric")
    if np.any(cn == 0.0):
        raise ValueError("zero-norm cluster center under cosine metric")
    zh = Z / zn[:, None]
    ch = centers / cn[:, None]
    cos = np.clip(zh @ ch.T, -1.0, 1.0)
    return 1.0 - cos, (zn, cn, zh, ch, cos)


def _backward_distances(dL_dd: np.ndarray, Z, centers, d, aux, metric: Metric):
    """Map dL/d(distance matrix) to dL/dZ and dL/dcenters."""
    if metric is Metric.EUCLIDEAN:
        diff = aux
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(d > 0.0, dL_dd / d, 0.0)
        dZ = np.einsum("nk,nkm->nm", w, diff)
        dC = -np.einsum("nk,nkm->km", w, diff)
        return dZ, dC
    zn, cn, zh, ch, cos = aux
    # d = 1 - cos;  d(d)/dz = -(ch_j - cos*zh_i)/|z|,  d(d)/dc = -(zh_i - cos*ch_j)/|c|
    s_rows = (dL_dd * cos).sum(axis=1)
    s_cols = (dL_dd * cos).sum(axis=0)
    dZ = -(dL_dd @ ch - s_rows[:, None] * zh) / zn[:, None]
    dC = -(dL_dd.T @ zh - s_cols[:, None] * ch) / cn[:, None]
    return dZ, dC


def loss_and_grad(
    head: ContrastiveHead,
    X,
    assignment: ClusterAssignment,
    alpha: float,
    metric: Metric,
    loss_kind: str = LOSS_NEGLOG,
) -> tuple[float, Gradients]:
    """Mean contrastive loss over examples and exact parameter gradients.

    loss_kind "neglog" is the cross-entropy form, the mean of
    -log softmax(-alpha * d)[own cluster]. "literal" instead minimizes the
    raw softmax probability of the own cluster (kept selectable because
    the two disagree on sign conventions; neglog is the default and the
    form every driver uses).
    """
    X = as_matrix(X, "X")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if loss_kind not in (LOSS_NEGLOG, LOSS_LITERAL):
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    labels = assignment.as_array()
    if labels.shape[0] != X.shape[0]:
        raise ValueError("assignment does not cover all rows")
    k = assignment.k
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    if np.any(counts == 0):
        raise ValueError("assignment has an empty cluster")
    n = X.shape[0]

    Z, cache = _forward_cached(head, X)
    centers = np.zeros((k, Z.shape[1]))
    np.add.at(centers, labels, Z)
    centers /= counts[:, None]

    d, aux = _distances_and_partials(Z, centers, metric)
    logits = -alpha * d
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    probs = expl / expl.sum(axis=1, keepdims=True)
    own = probs[np.arange(n), labels]

    if loss_kind == LOSS_NEGLOG:
        loss = float(-np.mean(np.log(np.maximum(own, 1e-300)))) + 0.0  # avoid -0.0
        dL_dlogits = probs.copy()
        dL_dlogits[np.arange(n), labels] -= 1.0
        dL_dlogits /= n
    else:
        loss = float(np.mean(own))
        # d(own_i)/d(logit_ij) = own_i * (1[j == l_i] - p_ij)
        dL_dlogits = -own[:, None] * probs
        dL_dlogits[np.arange(n), labels] += own
        dL_dlogits /= n

    dL_dd = -alpha * dL_dlogits
    dZ, dC = _backward_distances(dL_dd, Z, centers, d, aux, metric)
    # centers are means over members, so center gradients flow back evenly
    dZ += dC[labels] / counts[labels][:, None]

    if head.n_layers == 1:
        grads = Gradients(weights=[X.T @ dZ], biases=[dZ.sum(axis=0)])
    else:
        pre, hidden = cache
        dHidden = dZ @ head.weights[1].T
        dPre = dHidden * (pre > 0.0)
        grads = Gradients(
            weights=[X.T @ dPre, hidden.T @ dZ],
            biases=[dPre.sum(axis=0), dZ.sum(axis=0)],
        )
    return loss, grads


def adam_step(head: ContrastiveHead, state: AdamState, grads: Gradients) -> tuple[ContrastiveHead, AdamState]:
    """One bias-corrected Adam update, in place; returns (head, state)."""
    for g, p in zip(grads.weights, head.weights):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
    for g, p in zip(grads.biases, head.biases):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
    state.t += 1
    bc1 = 1.0 - state.beta1**state.t
    bc2 = 1.0 - state.beta2**state.t
    for params, gs, ms, vs in (
        (head.weights, grads.weights, state.m_w, state.v_w),
        (head.biases, grads.biases, state.m_b, state.v_b),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= state.beta1
            m += (1.0 - state.beta1) * g
            v *= state.beta2
            v += (1.0 - state.beta2) * g * g
            p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return head, state


def train_steps(
    head: ContrastiveHead,
    X,
    assignment: ClusterAssignment,
    alpha: float,
    metric: Metric,
    n_steps: int,
    lr: float = DEFAULT_LEARNING_RATE,
    state: AdamState | None = None,
    loss_kind: str = LOSS_NEGLOG,
    candidate_id: int = 0,
    member_id: int = 0,
) -> LossTrace:
    """Full-batch training loop; the trace records the loss before each update."""
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if state is None:
        state = init_adam(head, lr=lr)
    trace = LossTrace(candidate_id=candidate_id, member_id=member_id)
    for _ in range(n_steps):
        loss, grads = loss_and_grad(head, X, assignment, alpha, metric, loss_kind=loss_kind)
        adam_step(head, state, grads)
        trace.losses.append(loss)
    return trace
