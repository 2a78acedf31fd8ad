"""Dataset ingestion: IDX image/label files and seeded synthetic blobs."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from ._rng import NoiseSource
from .errors import BadMagic, CountMismatch, DomainError, ShapeMismatch, TruncatedFile
from .nn import LabeledExample

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049


@dataclass(frozen=True)
class Dataset:
    """Immutable array-backed dataset: features (n, dim), integer labels (n,)."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ShapeMismatch("features must be (n, dim) and labels (n,)")
        if self.features.shape[0] != self.labels.shape[0]:
            raise CountMismatch(
                f"{self.features.shape[0]} feature rows vs {self.labels.shape[0]} labels"
            )
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DomainError(f"labels must lie in [0, {self.num_classes})")
        if not np.isfinite(self.features).all():
            raise DomainError("features contain non-finite values")

    def __len__(self) -> int:
        return self.features.shape[0]

    def __getitem__(self, i: int) -> LabeledExample:
        return LabeledExample(self.features[i], int(self.labels[i]))

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.num_classes)


def _open_maybe_gzip(path: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, n: int, path: str) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise TruncatedFile(
            f"{path}: wanted {n} bytes at offset {f.tell() - len(data)}, file ended"
        )
    return data


def load_idx(images_path: str, labels_path: str) -> Dataset:
    """Load an IDX image/label pair (optionally gzip-compressed by suffix).

    Pixels are scaled from [0, 255] to [0, 1] and images flattened to
    row-major vectors.
    """
    with _open_maybe_gzip(images_path) as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, images_path))
        if magic != IMAGE_MAGIC:
            raise BadMagic(
                f"{images_path}: expected image magic {IMAGE_MAGIC} at offset 0, got {magic}"
            )
        count, rows, cols = struct.unpack(">III", _read_exact(f, 12, images_path))
        raw = _read_exact(f, count * rows * cols, images_path)
        extra = f.read(1)
        if extra:
            raise TruncatedFile(
                f"{images_path}: trailing bytes after {count} images at offset "
                f"{16 + count * rows * cols}"
            )
        pixels = np.frombuffer(raw, dtype=np.uint8).astype(np.float64) / 255.0
        features = pixels.reshape(count, rows * cols)

    with _open_maybe_gzip(labels_path) as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, labels_path))
        if magic != LABEL_MAGIC:
            raise BadMagic(
                f"{labels_path}: expected label magic {LABEL_MAGIC} at offset 0, got {magic}"
            )
        (label_count,) = struct.unpack(">I", _read_exact(f, 4, labels_path))
        if label_count != count:
            raise CountMismatch(
                f"{images_path} holds {count} images but {labels_path} holds "
                f"{label_count} labels"
            )
        labels = np.frombuffer(_read_exact(f, count, labels_path), dtype=np.uint8)

    labels = labels.astype(np.int64)
    num_classes = int(labels.max()) + 1 if count else 1
    return Dataset(features, labels, num_classes)


def synthetic_blobs(
    num_classes: int, per_class: int, dim: int, separation: float, seed: int
) -> Dataset:
    """Gaussian clusters with pairwise centre distance at least `separation`.

    Centres are drawn from a seeded standard normal and rescaled so the
    minimum pairwise distance meets `separation`; unit-variance points are
    drawn around them. Deterministic under the seed.
    """
    if num_classes < 1 or per_class < 1 or dim < 1:
        raise DomainError("num_classes, per_class and dim must be positive")
    if separation < 0.0:
        raise DomainError(f"separation must be >= 0, got {separation}")
    rng = NoiseSource(seed)
    centers = rng.standard_normals(num_classes * dim).reshape(num_classes, dim)
    if num_classes > 1 and separation > 0.0:
        diffs = centers[:, None, :] - centers[None, :, :]
        dist = np.sqrt((diffs**2).sum(axis=2))
        min_dist = dist[np.triu_indices(num_classes, k=1)].min()
        if min_dist == 0.0:
            raise DomainError("degenerate coincident centres; change the seed")
        if min_dist < separation:
            centers = centers * (separation / min_dist)
    points = rng.standard_normals(num_classes * per_class * dim).reshape(
        num_classes, per_class, dim
    )
    features = (centers[:, None, :] + points).reshape(num_classes * per_class, dim)
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    return Dataset(features, labels, num_classes)
