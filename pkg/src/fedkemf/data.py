"""Dataset loading/synthesis and label-skewed Dirichlet partitioning."""

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagicError, CountMismatchError, InfeasiblePartitionError, TruncatedFileError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class Dataset:
    features: np.ndarray  # M x D float64
    labels: np.ndarray    # M int64 in [0, num_classes)
    num_classes: int
    name: str = "dataset"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on sample count")

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]


@dataclass
class PartitionMap:
    client_indices: list  # per-client index lists into one Dataset
    alpha: float
    seed: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": self.alpha,
                "seed": self.seed,
                "clients": [[int(i) for i in idx] for idx in self.client_indices],
            }
        )

    @classmethod
    def from_json(cls, text: str):
        d = json.loads(text)
        return cls([list(map(int, c)) for c in d["clients"]], d["alpha"], d["seed"])


def _read_exact(f, n, path):
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"{path}: expected {n} bytes, got {len(buf)}")
    return buf


def load_idx(images_path, labels_path, name="idx") -> Dataset:
    """Load an IDX image/label file pair; pixels scaled to [0, 1], images flattened."""
    with open(images_path, "rb") as f:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(f, 16, images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise BadMagicError(f"{images_path}: bad images magic 0x{magic:08x}")
        pixels = np.frombuffer(_read_exact(f, count * rows * cols, images_path), dtype=np.uint8)
    with open(labels_path, "rb") as f:
        magic, label_count = struct.unpack(">II", _read_exact(f, 8, labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise BadMagicError(f"{labels_path}: bad labels magic 0x{magic:08x}")
        labels = np.frombuffer(_read_exact(f, label_count, labels_path), dtype=np.uint8)
    if count != label_count:
        raise CountMismatchError(
            f"images file has {count} items but labels file has {label_count}"
        )
    features = pixels.reshape(count, rows * cols).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.int64), int(labels.max()) + 1, name)


def save_idx(dataset: Dataset, images_path, labels_path):
    """Write a Dataset back to IDX files (features quantized to bytes, D x 1 images)."""
    m, d = dataset.features.shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, m, d, 1))
        f.write(np.round(dataset.features * 255.0).astype(np.uint8).tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, m))
        f.write(dataset.labels.astype(np.uint8).tobytes())


def _blob_centers(num_classes, dim, spread):
    """Deterministic axis-aligned cluster centers with pairwise distance >= 4*spread."""
    centers = np.zeros((num_classes, dim))
    for k in range(num_classes):
        axis = k % dim
        sign = -1.0 if (k // dim) % 2 else 1.0
        magnitude = 4.0 * spread * (1 + k // (2 * dim))
        centers[k, axis] = sign * magnitude
    return centers


def synth_blobs(num_classes, per_class, dim, spread, seed, name="blobs") -> Dataset:
    """Seeded Gaussian clusters, one per class, linearly separable by construction."""
    if num_classes < 2 or per_class < 1 or dim < 1 or spread <= 0:
        raise ValueError("invalid blob parameters")
    rng = np.random.default_rng(seed)
    centers = _blob_centers(num_classes, dim, spread)
    features = np.concatenate(
        [centers[k] + spread * rng.standard_normal((per_class, dim)) for k in range(num_classes)]
    )
    labels = np.repeat(np.arange(num_classes), per_class)
    return Dataset(features, labels, num_classes, name)


def dirichlet_partition(dataset: Dataset, num_clients, alpha, seed,
                        min_per_client=10, indices=None, max_attempts=100) -> PartitionMap:
    """Label-skew partition: per class, split its indices by a Dirichlet(alpha) draw.

    Partitions `indices` (defaults to the whole dataset) disjointly and
    completely across clients; redraws with seed+attempt until every client
    holds at least min_per_client samples.
    """
    if num_clients < 1:
        raise ValueError("need at least 1 client")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    universe = np.arange(len(dataset)) if indices is None else np.asarray(indices, dtype=np.int64)
    labels = dataset.labels[universe]
    for attempt in range(max_attempts):
        rng = np.random.default_rng(seed + attempt)
        shards = [[] for _ in range(num_clients)]
        for k in range(dataset.num_classes):
            class_idx = universe[labels == k]
            if class_idx.size == 0:
                continue
            class_idx = rng.permutation(class_idx)
            p = rng.dirichlet(np.full(num_clients, alpha))
            cuts = (np.cumsum(p)[:-1] * class_idx.size).astype(np.int64)
            for j, piece in enumerate(np.split(class_idx, cuts)):
                shards[j].extend(int(i) for i in piece)
        if all(len(s) >= min_per_client for s in shards):
            return PartitionMap(shards, float(alpha), int(seed))
    raise InfeasiblePartitionError(
        f"could not give every client {min_per_client} samples in {max_attempts} draws"
    )


def label_histogram(dataset: Dataset, indices) -> np.ndarray:
    return np.bincount(dataset.labels[np.asarray(indices, dtype=np.int64)],
                       minlength=dataset.num_classes)


def label_entropy(histogram) -> float:
    """Shannon entropy (nats) of a client's label distribution."""
    h = np.asarray(histogram, dtype=np.float64)
    total = h.sum()
    if total == 0:
        return 0.0
    p = h / total
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))
