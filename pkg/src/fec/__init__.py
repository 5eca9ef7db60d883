"""Few-example clustering on frozen embeddings.

Candidate cluster assignments are generated (exhaustively or by repeated
balanced clustering), a small contrastive head is trained per candidate,
and the candidate with the smallest early-stage training loss wins.
"""

from .clustering import (
    ClusterAssignment,
    SoftAssignment,
    enumerate_assignments,
    kmeans,
    round_to_hard,
    sinkhorn_kmeans,
    sinkhorn_plan,
)
from .contrastive import (
    AdamState,
    ContrastiveHead,
    Gradients,
    LossTrace,
    adam_step,
    forward,
    init_adam,
    init_head,
    loss_and_grad,
    train_steps,
)
from .episodes import (
    EmbeddingSet,
    EpisodeSpec,
    gen_synthetic,
    load_embeddings,
    sample_episode,
    save_embeddings,
)
from .linalg import ConvergenceError, Metric, distance, pca_project, row_mean
from .metrics import ari, nmi, same_partition, selection_accuracy
from .rng import SplitMix64, derive_seed
from .search import (
    EpisodeResult,
    ExhaustiveConfig,
    IterativeConfig,
    fec_exhaustive,
    fec_iterative,
    run_baseline_41,
    run_baseline_cluster,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "ClusterAssignment",
    "ContrastiveHead",
    "ConvergenceError",
    "EmbeddingSet",
    "EpisodeResult",
    "EpisodeSpec",
    "ExhaustiveConfig",
    "Gradients",
    "IterativeConfig",
    "LossTrace",
    "Metric",
    "SoftAssignment",
    "SplitMix64",
    "adam_step",
    "ari",
    "derive_seed",
    "distance",
    "enumerate_assignments",
    "fec_exhaustive",
    "fec_iterative",
    "forward",
    "gen_synthetic",
    "init_adam",
    "init_head",
    "kmeans",
    "load_embeddings",
    "loss_and_grad",
    "nmi",
    "pca_project",
    "round_to_hard",
    "row_mean",
    "run_baseline_41",
    "run_baseline_cluster",
    "same_partition",
    "sample_episode",
    "save_embeddings",
    "selection_accuracy",
    "sinkhorn_kmeans",
    "sinkhorn_plan",
    "train_steps",
]
