"""Few-example clustering drivers: exhaustive and iterative candidate search.

Both drivers share one idea: train a small contrastive head per candidate
cluster assignment and prefer the candidate whose training loss is lowest
early on. Training is run in lockstep rounds (one optimizer step per
candidate-member per round) so "early" means the same thing for every
candidate. Under ensembling, a candidate's loss statistic is the minimum
over its members' current losses.

Seed contract (stable, relied on by tests and the CLI):
  candidate slot i       -> derive_seed(cfg.seed, "candidate", i)
  head (cand c, member m, generation g) -> derive_seed(cfg.seed, "head", c, m, g)
  refinement event e of candidate c     -> derive_seed(cfg.seed, "refine", c, e)
Generation g starts at 0 and increments at every re-initialization.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from enum import Enum

import numpy as np

from .clustering import ClusterAssignment, enumerate_assignments, kmeans, sinkhorn_kmeans
from .contrastive import (
    DEFAULT_LEARNING_RATE,
    DEFAULT_OUT_DIM,
    LOSS_NEGLOG,
    LossTrace,
    adam_step,
    forward,
    init_adam,
    init_head,
    loss_and_grad,
)
from .episodes import EmbeddingSet
from .linalg import Metric, as_matrix, distance, pca_project, row_mean
from .metrics import ari, nmi, same_partition
from .rng import derive_seed

log = logging.getLogger("fec")

BASE_KMEANS = "kmeans"
BASE_SINKHORN = "sinkhorn"


@dataclass(frozen=True)
class ExhaustiveConfig:
    """Knobs for the all-candidates driver.

    delta is the early-stop threshold on the round-to-round decrease of
    the best candidate's loss; delta = 0 disables early stopping and the
    driver runs all max_steps rounds.
    """

    sizes: tuple[int, ...] = (4, 1)
    alpha: float = 10.0
    n_ensemble: int = 32
    delta: float = 1e-5
    metric: Metric = Metric.COSINE
    seed: int = 0
    max_steps: int = 500
    n_layers: int = 1
    out_dim: int = DEFAULT_OUT_DIM
    lr: float = DEFAULT_LEARNING_RATE
    loss_kind: str = LOSS_NEGLOG

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.n_ensemble < 1:
            raise ValueError("n_ensemble must be at least 1")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")


@dataclass(frozen=True)
class IterativeConfig:
    """Knobs for the partial-search driver with periodic refinement.

    select_best / refine / reinit are ablation switches; all three on is
    the full method. t_refine is the refinement period in rounds, t_fine
    the total number of rounds.
    """

    alpha: float = 10.0
    n_candidates: int = 8
    n_ensemble: int = 5
    t_fine: int = 64
    t_refine: int = 4
    metric: Metric = Metric.COSINE
    base_clusterer: str = BASE_SINKHORN
    gamma: float = 0.1
    seed: int = 0
    n_layers: int = 2
    out_dim: int = DEFAULT_OUT_DIM
    lr: float = DEFAULT_LEARNING_RATE
    loss_kind: str = LOSS_NEGLOG
    select_best: bool = True
    refine: bool = True
    reinit: bool = True
    # near-duplicate rows (tight blobs, or embeddings collapsed by the
    # contrastive pull) leave the transport solve with a sublinear tail well
    # below 1e-4, while the hard rounding settles at entry scale ~1/N; the
    # driver therefore clusters at a rounding-safe tolerance
    sinkhorn_tol: float = 1e-4
    sinkhorn_max_iters: int = 5000

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be at least 1")
        if self.n_ensemble < 1:
            raise ValueError("n_ensemble must be at least 1")
        if not 1 <= self.t_refine <= self.t_fine:
            raise ValueError("need 1 <= t_refine <= t_fine")
        if self.base_clusterer not in (BASE_KMEANS, BASE_SINKHORN):
            raise ValueError(f"unknown base clusterer {self.base_clusterer!r}")


@dataclass
class EpisodeResult:
    """Everything recorded about one clustering task."""

    episode_id: int
    method: str
    chosen: ClusterAssignment | None
    truth: ClusterAssignment | None
    candidates: list[ClusterAssignment]
    losses: list[float]
    traces: list[LossTrace]
    refine_rounds: list[list[int]]
    timelines: list[list[tuple[int, tuple[int, ...]]]]
    metrics: dict | None
    per_candidate_metrics: list[dict] | None
    config: dict

    def to_dict(self) -> dict:
        """JSON-ready payload (loss traces are exported separately as CSV)."""
        return {
            "episode_id": self.episode_id,
            "method": self.method,
            "chosen": list(self.chosen.labels) if self.chosen is not None else None,
            "truth": list(self.truth.labels) if self.truth is not None else None,
            "candidates": [list(c.labels) for c in self.candidates],
            "losses": self.losses,
            "metrics": self.metrics,
            "per_candidate_metrics": self.per_candidate_metrics,
            "refine_rounds": self.refine_rounds,
            "timelines": [[[start, list(labels)] for start, labels in tl] for tl in self.timelines],
            "config": self.config,
        }


def config_to_dict(cfg) -> dict:
    out = {}
    for key, value in asdict(cfg).items():
        if isinstance(value, Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out


def truth_of(X) -> ClusterAssignment | None:
    labels = getattr(X, "labels", None)
    if labels is None:
        return None
    return ClusterAssignment.from_labels(labels)


def score_partition(chosen: ClusterAssignment, truth: ClusterAssignment) -> dict:
    return {
        "ari": ari(chosen.labels, truth.labels),
        "nmi": nmi(chosen.labels, truth.labels),
        "correct": bool(same_partition(chosen.labels, truth.labels)),
    }


class _Unit:
    """One (candidate, member) training unit: head + optimizer + trace."""

    __slots__ = ("head", "state", "trace")

    def __init__(self, in_dim, cfg, seed, candidate_id, member_id):
        self.head = init_head(in_dim, cfg.out_dim, cfg.n_layers, seed)
        self.state = init_adam(self.head, lr=cfg.lr)
        self.trace = LossTrace(candidate_id=candidate_id, member_id=member_id)

    def reset(self, in_dim, cfg, seed):
        self.head = init_head(in_dim, cfg.out_dim, cfg.n_layers, seed)
        self.state = init_adam(self.head, lr=cfg.lr)

    def step(self, X, assignment, cfg) -> float:
        loss, grads = loss_and_grad(
            self.head, X, assignment, cfg.alpha, cfg.metric, loss_kind=cfg.loss_kind
        )
        adam_step(self.head, self.state, grads)
        self.trace.losses.append(loss)
        return loss


def per_round_candidate_losses(result: EpisodeResult) -> np.ndarray:
    """(rounds x candidates) array of per-round loss minima over members."""
    n_cand = len(result.candidates)
    by_cand = [[] for _ in range(n_cand)]
    for trace in result.traces:
        by_cand[trace.candidate_id].append(trace.losses)
    rounds = min(len(l) for lists in by_cand for l in lists)
    out = np.empty((rounds, n_cand))
    for c, lists in enumerate(by_cand):
        out[:, c] = np.min(np.asarray([l[:rounds] for l in lists]), axis=0)
    return out


def fec_exhaustive(X, cfg: ExhaustiveConfig, episode_id: int = 0) -> EpisodeResult:
    """Try every cluster assignment of the configured sizes.

    All candidates train in lockstep; after each round the best candidate
    is the argmin of the per-candidate loss (min over ensemble members).
    Training stops once the best loss decreases by less than delta
    between consecutive rounds (two-round minimum), or at max_steps.
    """
    feats = as_matrix(getattr(X, "features", X), "X")
    n = feats.shape[0]
    candidates = enumerate_assignments(n, cfg.sizes)
    units = [
        [
            _Unit(feats.shape[1], cfg, derive_seed(cfg.seed, "head", c, m, 0), c, m)
            for m in range(cfg.n_ensemble)
        ]
        for c in range(len(candidates))
    ]
    prev_best = None
    cand_losses = [np.inf] * len(candidates)
    for t in range(1, cfg.max_steps + 1):
        for c, cand in enumerate(candidates):
            cand_losses[c] = min(u.step(feats, cand, cfg) for u in units[c])
        best = min(cand_losses)
        if prev_best is not None and cfg.delta > 0 and prev_best - best < cfg.delta:
            break
        prev_best = best
    chosen_idx = int(np.argmin(cand_losses))
    truth = truth_of(X)
    chosen = candidates[chosen_idx]
    return EpisodeResult(
        episode_id=episode_id,
        method="fec",
        chosen=chosen,
        truth=truth,
        candidates=candidates,
        losses=[float(l) for l in cand_losses],
        traces=[u.trace for row in units for u in row],
        refine_rounds=[[] for _ in candidates],
        timelines=[[(1, cand.labels)] for cand in candidates],
        metrics=score_partition(chosen, truth) if truth is not None else None,
        per_candidate_metrics=None,
        config=config_to_dict(cfg),
    )


def _base_cluster(feats: np.ndarray, k: int, cfg: IterativeConfig, seed: int) -> ClusterAssignment:
    if cfg.base_clusterer == BASE_KMEANS:
        return kmeans(feats, k, cfg.metric, seed=seed)
    return sinkhorn_kmeans(
        feats,
        k,
        cfg.metric,
        gamma=cfg.gamma,
        seed=seed,
        tol=cfg.sinkhorn_tol,
        max_iters=cfg.sinkhorn_max_iters,
    )


def _generate_candidates(feats: np.ndarray, k: int, cfg: IterativeConfig) -> list[ClusterAssignment]:
    """n_candidates base-clusterer runs under distinct derived seeds.

    Duplicate partitions are re-seeded up to 10 times per slot, then
    allowed to stand so the count is always n_candidates.
    """
    out: list[ClusterAssignment] = []
    counter = 0
    for slot in range(cfg.n_candidates):
        retries = 0
        while True:
            cand = _base_cluster(feats, k, cfg, derive_seed(cfg.seed, "candidate", counter))
            counter += 1
            if cand not in out or retries >= 10:
                if retries >= 10:
                    log.debug("candidate slot %d kept a duplicate after %d re-seeds", slot, retries)
                out.append(cand)
                break
            retries += 1
    return out


def fec_iterative(X, k: int, cfg: IterativeConfig, episode_id: int = 0) -> EpisodeResult:
    """Partial candidate search with periodic assignment refinement.

    Every t_refine rounds each candidate is re-clustered in the feature
    space of its lowest-loss member, all members adopt the refined
    assignment, and (unless ablated) their heads are re-initialized.
    After t_fine rounds the candidate whose best member shows the
    smallest loss wins; with select_best ablated the result instead
    averages every candidate's metrics.
    """
    feats = as_matrix(getattr(X, "features", X), "X")
    candidates = _generate_candidates(feats, k, cfg)
    units = [
        [
            _Unit(feats.shape[1], cfg, derive_seed(cfg.seed, "head", c, m, 0), c, m)
            for m in range(cfg.n_ensemble)
        ]
        for c in range(len(candidates))
    ]
    generations = [0] * len(candidates)
    refine_rounds: list[list[int]] = [[] for _ in candidates]
    timelines = [[(1, cand.labels)] for cand in candidates]
    cand_losses = [np.inf] * len(candidates)
    for t in range(1, cfg.t_fine + 1):
        for c in range(len(candidates)):
            cand_losses[c] = min(u.step(feats, candidates[c], cfg) for u in units[c])
            if cfg.refine and t % cfg.t_refine == 0:
                event = len(refine_rounds[c])
                best_member = int(np.argmin([u.trace.losses[-1] for u in units[c]]))
                learned = forward(units[c][best_member].head, feats)
                refined = _base_cluster(learned, k, cfg, derive_seed(cfg.seed, "refine", c, event))
                if refined != candidates[c]:
                    log.debug("round %d: candidate %d assignment refined (event %d)", t, c, event)
                    timelines[c].append((t + 1, refined.labels))
                    candidates[c] = refined
                refine_rounds[c].append(t)
                if cfg.reinit:
                    generations[c] += 1
                    for m, unit in enumerate(units[c]):
                        unit.reset(feats.shape[1], cfg, derive_seed(cfg.seed, "head", c, m, generations[c]))
    truth = truth_of(X)
    per_candidate = [score_partition(cand, truth) for cand in candidates] if truth is not None else None
    losses = [float(l) for l in cand_losses]
    if cfg.select_best:
        chosen_idx = int(np.argmin(losses))
        chosen = candidates[chosen_idx]
        metrics = score_partition(chosen, truth) if truth is not None else None
    else:
        chosen = None
        metrics = None
        if per_candidate is not None:
            metrics = {
                "ari": float(np.mean([m["ari"] for m in per_candidate])),
                "nmi": float(np.mean([m["nmi"] for m in per_candidate])),
                "correct": float(np.mean([m["correct"] for m in per_candidate])),
            }
    return EpisodeResult(
        episode_id=episode_id,
        method=f"fec+{cfg.base_clusterer}",
        chosen=chosen,
        truth=truth,
        candidates=candidates,
        losses=losses,
        traces=[u.trace for row in units for u in row],
        refine_rounds=refine_rounds,
        timelines=timelines,
        metrics=metrics,
        per_candidate_metrics=per_candidate,
        config=config_to_dict(cfg),
    )


def run_baseline_41(X, metric: Metric, pca_dims: int | None = None) -> int:
    """Index of the example farthest from the mean of the other four."""
    feats = as_matrix(getattr(X, "features", X), "X")
    if feats.shape[0] != 5:
        raise ValueError("the farthest-example rule applies to exactly 5 examples")
    if pca_dims is not None:
        feats = pca_project(feats, pca_dims)
    dists = [
        distance(feats[i], row_mean(feats, [j for j in range(5) if j != i]), metric)
        for i in range(5)
    ]
    return int(np.argmax(dists))


def singleton_assignment(index: int, n: int = 5) -> ClusterAssignment:
    """Partition with one singleton at `index`, everything else together."""
    labels = [0] * n
    labels[index] = 1
    return ClusterAssignment.from_labels(labels)


def run_baseline_cluster(
    X,
    k: int,
    method: str,
    pca_dims: int | None = None,
    seed: int = 0,
    metric: Metric = Metric.COSINE,
    gamma: float = 0.1,
    tol: float = 1e-4,
    max_iters: int = 5000,
) -> ClusterAssignment:
    """K-means-family baselines, optionally behind a PCA front end.

    Transport tolerances default to the same values the iterative driver
    uses internally, so a driver reduced to its base clusterer (single
    candidate, refinement off) reproduces this baseline bit for bit.
    """
    feats = as_matrix(getattr(X, "features", X), "X")
    if method == "kmeans":
        return kmeans(feats, k, metric, seed=seed)
    if method == "sinkhorn":
        return sinkhorn_kmeans(feats, k, metric, gamma=gamma, seed=seed, tol=tol, max_iters=max_iters)
    if method == "pca+sinkhorn":
        if pca_dims is None:
            raise ValueError("pca+sinkhorn requires pca_dims")
        return sinkhorn_kmeans(
            pca_project(feats, pca_dims), k, metric, gamma=gamma, seed=seed, tol=tol, max_iters=max_iters
        )
    raise ValueError(f"unknown clustering baseline {method!r}")
