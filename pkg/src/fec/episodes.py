"""Embedding ingestion, episodic task sampling, and synthetic corpora.

The on-disk interchange formats are deliberately boring so other tools
can produce them:

  text (one set per file, UTF-8, LF):
      fecemb v1 n=<N> d=<D> labeled=<0|1>
      <id>,<label-or-->,<f_0>,...,<f_{D-1}>
  binary:
      16-byte magic "FECEMB01________", u64 N, u64 D, u8 labeled,
      then per example: u64 id length, id bytes, i64 label (-1 when
      unlabeled), D little-endian float64 features.

Text features are printed with shortest round-trip precision, so
save -> load is bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix
from .rng import SplitMix64, derive_seed

TEXT_MAGIC = "fecemb v1"
BINARY_MAGIC = b"FECEMB01________"

KIND_FOUR_TO_ONE = "four_to_one"
KIND_BALANCED = "balanced"


class EmbeddingFormatError(ValueError):
    """Raised when an embedding file does not parse."""


@dataclass
class EmbeddingSet:
    """N examples as D-dimensional feature vectors, optionally labeled."""

    ids: tuple[str, ...]
    features: np.ndarray
    labels: tuple[int, ...] | None = None
    source: str = ""

    def __post_init__(self):
        self.features = as_matrix(self.features, "features")
        self.ids = tuple(str(i) for i in self.ids)
        if len(self.ids) != self.features.shape[0]:
            raise ValueError("ids length does not match feature rows")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("example ids must be unique")
        for eid in self.ids:
            if "," in eid or "\n" in eid or not eid:
                raise ValueError(f"invalid example id {eid!r}")
        if self.labels is not None:
            self.labels = tuple(int(l) for l in self.labels)
            if len(self.labels) != self.features.shape[0]:
                raise ValueError("labels length does not match feature rows")
        if self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise ValueError("embedding set must be non-empty")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_ids(self) -> list[int]:
        if self.labels is None:
            raise ValueError("embedding set is unlabeled")
        return sorted(set(self.labels))


@dataclass
class EpisodeSpec:
    """How to draw clustering tasks from a labeled corpus."""

    kind: str
    n_clusters: int
    sizes: tuple[int, ...]
    n_episodes: int
    seed: int

    def __post_init__(self):
        if self.kind not in (KIND_FOUR_TO_ONE, KIND_BALANCED):
            raise ValueError(f"unknown episode kind {self.kind!r}")
        self.sizes = tuple(int(s) for s in self.sizes)
        if self.kind == KIND_FOUR_TO_ONE and (self.sizes != (4, 1) or self.n_clusters != 2):
            raise ValueError("four_to_one episodes have sizes (4, 1)")
        if self.kind == KIND_BALANCED:
            if len(set(self.sizes)) != 1 or len(self.sizes) != self.n_clusters:
                raise ValueError("balanced episodes need equal sizes, one per cluster")
        if self.n_episodes < 1:
            raise ValueError("n_episodes must be positive")

    @staticmethod
    def four_to_one(n_episodes: int, seed: int) -> "EpisodeSpec":
        return EpisodeSpec(KIND_FOUR_TO_ONE, 2, (4, 1), n_episodes, seed)

    @staticmethod
    def balanced(k: int, per_cluster: int, n_episodes: int, seed: int) -> "EpisodeSpec":
        return EpisodeSpec(KIND_BALANCED, k, (per_cluster,) * k, n_episodes, seed)


def save_embeddings(es: EmbeddingSet, path, fmt: str = "text") -> None:
    if fmt == "text":
        lines = [f"{TEXT_MAGIC} n={es.n} d={es.dim} labeled={0 if es.labels is None else 1}"]
        for i in range(es.n):
            label = "-" if es.labels is None else str(es.labels[i])
            feats = ",".join(repr(float(v)) for v in es.features[i])
            lines.append(f"{es.ids[i]},{label},{feats}")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    elif fmt == "binary":
        with open(path, "wb") as f:
            f.write(BINARY_MAGIC)
            f.write(struct.pack("<QQB", es.n, es.dim, 0 if es.labels is None else 1))
            for i in range(es.n):
                raw = es.ids[i].encode("utf-8")
                label = -1 if es.labels is None else es.labels[i]
                f.write(struct.pack("<Q", len(raw)))
                f.write(raw)
                f.write(struct.pack("<q", label))
                f.write(es.features[i].astype("<f8").tobytes())
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _load_text(path) -> EmbeddingSet:
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().split("\n")
    header = lines[0] if lines else ""
    parts = header.split()
    if len(parts) != 5 or parts[0] != "fecemb" or parts[1] != "v1":
        raise EmbeddingFormatError(f"{path}: malformed header {header!r}")
    try:
        n = int(parts[2].removeprefix("n="))
        d = int(parts[3].removeprefix("d="))
        labeled = int(parts[4].removeprefix("labeled="))
    except ValueError:
        raise EmbeddingFormatError(f"{path}: malformed header {header!r}") from None
    if labeled not in (0, 1):
        raise EmbeddingFormatError(f"{path}: labeled flag must be 0 or 1")
    ids = []
    labels = []
    features = np.empty((n, d))
    body = lines[1:]
    while body and body[-1] == "":
        body.pop()
    if len(body) != n:
        raise EmbeddingFormatError(f"{path}: header says n={n} but found {len(body)} rows")
    for row, line in enumerate(body):
        cells = line.split(",")
        if len(cells) != d + 2:
            raise EmbeddingFormatError(
                f"{path}: line {row + 2}: expected {d + 2} fields, got {len(cells)}"
            )
        ids.append(cells[0])
        if labeled:
            try:
                labels.append(int(cells[1]))
            except ValueError:
                raise EmbeddingFormatError(f"{path}: line {row + 2}: bad label {cells[1]!r}") from None
        try:
            features[row] = [float(c) for c in cells[2:]]
        except ValueError:
            raise EmbeddingFormatError(f"{path}: line {row + 2}: bad feature value") from None
        if not np.all(np.isfinite(features[row])):
            raise EmbeddingFormatError(f"{path}: line {row + 2}: non-finite feature value")
    return EmbeddingSet(
        ids=tuple(ids),
        features=features,
        labels=tuple(labels) if labeled else None,
        source=str(path),
    )


def _load_binary(path) -> EmbeddingSet:
    with open(path, "rb") as f:
        data = f.read()
    off = len(BINARY_MAGIC)
    try:
        n, d, labeled = struct.unpack_from("<QQB", data, off)
        off += 17
        ids = []
        labels = []
        features = np.empty((n, d))
        for row in range(n):
            (id_len,) = struct.unpack_from("<Q", data, off)
            off += 8
            ids.append(data[off : off + id_len].decode("utf-8"))
            off += id_len
            (label,) = struct.unpack_from("<q", data, off)
            off += 8
            labels.append(label)
            features[row] = np.frombuffer(data, dtype="<f8", count=d, offset=off)
            off += 8 * d
    except (struct.error, UnicodeDecodeError, ValueError) as e:
        raise EmbeddingFormatError(f"{path}: truncated or corrupt binary data: {e}") from e
    if off != len(data):
        raise EmbeddingFormatError(f"{path}: {len(data) - off} trailing bytes")
    if not np.all(np.isfinite(features)):
        raise EmbeddingFormatError(f"{path}: non-finite feature values")
    return EmbeddingSet(
        ids=tuple(ids),
        features=features,
        labels=tuple(labels) if labeled else None,
        source=str(path),
    )


def load_embeddings(path) -> EmbeddingSet:
    """Load a text or binary embedding file (auto-detected by magic)."""
    with open(path, "rb") as f:
        head = f.read(len(BINARY_MAGIC))
    if head == BINARY_MAGIC:
        return _load_binary(path)
    if head.startswith(TEXT_MAGIC.encode("utf-8")):
        return _load_text(path)
    raise EmbeddingFormatError(f"{path}: not a recognized embedding file")


def _per_class_rows(corpus: EmbeddingSet) -> dict[int, list[int]]:
    """Row indices per class, ordered by example id so sampling does not
    depend on file row order."""
    by_class: dict[int, list[tuple[str, int]]] = {}
    for row, (eid, label) in enumerate(zip(corpus.ids, corpus.labels)):
        by_class.setdefault(label, []).append((eid, row))
    return {c: [row for _, row in sorted(pairs)] for c, pairs in by_class.items()}


def sample_episode(corpus: EmbeddingSet, spec: EpisodeSpec, episode_index: int) -> EmbeddingSet:
    """Draw one task: deterministic given (spec.seed, episode_index).

    Classes are drawn without replacement within the episode; examples
    are drawn without replacement within each class. Ground-truth labels
    ride along.
    """
    if corpus.labels is None:
        raise ValueError("episode sampling requires a labeled corpus")
    rng = SplitMix64(derive_seed(spec.seed, "episode", episode_index))
    rows_by_class = _per_class_rows(corpus)
    classes = sorted(rows_by_class)
    if len(classes) < spec.n_clusters:
        raise ValueError(f"corpus has {len(classes)} classes, episode needs {spec.n_clusters}")
    remaining = classes[:]
    picked_rows: list[int] = []
    for size in spec.sizes:
        cls = remaining.pop(rng.randint(len(remaining)))
        pool = rows_by_class[cls]
        if len(pool) < size:
            raise ValueError(f"class {cls} has {len(pool)} examples, episode needs {size}")
        picked_rows.extend(pool[i] for i in rng.sample(len(pool), size))
    rng.shuffle(picked_rows)
    return EmbeddingSet(
        ids=tuple(corpus.ids[r] for r in picked_rows),
        features=corpus.features[picked_rows],
        labels=tuple(corpus.labels[r] for r in picked_rows),
        source=f"{corpus.source}#ep{episode_index}",
    )


def gen_synthetic(
    n_classes: int,
    per_class: int,
    dim: int,
    sep: float,
    noise: float,
    seed: int,
) -> EmbeddingSet:
    """Labeled synthetic corpus: unit-sphere class centers plus Gaussian noise.

    Centers are rejection-sampled until all pairwise Euclidean distances
    reach sep (up to 1000 tries per center).
    """
    if sep <= 0:
        raise ValueError("sep must be positive")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    if n_classes < 1 or per_class < 1 or dim < 1:
        raise ValueError("n_classes, per_class, and dim must be positive")
    center_rng = SplitMix64(derive_seed(seed, "centers"))
    centers = np.empty((n_classes, dim))
    for c in range(n_classes):
        for attempt in range(1000):
            v = center_rng.normals(dim)
            norm = np.linalg.norm(v)
            if norm < 1e-12:
                continue
            v = v / norm
            if c == 0 or np.min(np.linalg.norm(centers[:c] - v, axis=1)) >= sep:
                centers[c] = v
                break
        else:
            raise ValueError(f"could not place center {c} with separation {sep} in 1000 tries")
    noise_rng = SplitMix64(derive_seed(seed, "noise"))
    features = np.repeat(centers, per_class, axis=0)
    features = features + noise * noise_rng.normals(n_classes * per_class * dim).reshape(-1, dim)
    ids = tuple(f"c{c:03d}_x{i:04d}" for c in range(n_classes) for i in range(per_class))
    labels = tuple(c for c in range(n_classes) for _ in range(per_class))
    return EmbeddingSet(
        ids=ids,
        features=features,
        labels=labels,
        source=f"synthetic(classes={n_classes},per_class={per_class},dim={dim},sep={sep},noise={noise},seed={seed})",
    )
