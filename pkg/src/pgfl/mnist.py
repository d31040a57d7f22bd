"""MNIST-format ingestion and binary classification task construction.

Images and labels are read and written in the classic IDX binary layout
(big-endian, magic 0x00000803 for image files and 0x00000801 for label
files). Real MNIST is used when a data directory is supplied; otherwise a
deterministic bundled digit dataset is built once from scikit-learn's
handwritten digits (real 8x8 scans upscaled to 28x28) and stored through
the same IDX writer, so every downstream code path is identical.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from pgfl.datagen import Dataset
from pgfl.errors import DataError, IdxFormatError

__all__ = [
    "MnistData",
    "read_idx_images",
    "read_idx_labels",
    "write_idx_images",
    "write_idx_labels",
    "load_mnist",
    "build_classification_task",
    "build_test_set",
    "features_from_images",
    "ensure_bundled_digits",
    "load_digit_data",
]

_IMAGE_MAGIC = 0x00000803
_LABEL_MAGIC = 0x00000801

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


@dataclass
class MnistData:
    """Raw image/label collection: images uint8 [N, 28, 28], labels uint8 [N]."""

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise IdxFormatError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )

    @property
    def count(self) -> int:
        return self.images.shape[0]


def read_idx_images(path: str | Path) -> np.ndarray:
    """Parse an IDX image file into uint8 [N, rows, cols]."""
    data = Path(path).read_bytes()
    if len(data) < 16:
        raise IdxFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, count, rows, cols = struct.unpack(">IIII", data[:16])
    if magic != _IMAGE_MAGIC:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{_IMAGE_MAGIC:08x}"
        )
    expected = 16 + count * rows * cols
    if len(data) != expected:
        raise IdxFormatError(
            f"{path}: expected {expected} bytes for {count} images, got {len(data)}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=16).reshape(count, rows, cols)


def read_idx_labels(path: str | Path) -> np.ndarray:
    """Parse an IDX label file into uint8 [N]."""
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise IdxFormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, count = struct.unpack(">II", data[:8])
    if magic != _LABEL_MAGIC:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{_LABEL_MAGIC:08x}"
        )
    if len(data) != 8 + count:
        raise IdxFormatError(
            f"{path}: expected {8 + count} bytes for {count} labels, got {len(data)}"
        )
    return np.frombuffer(data, dtype=np.uint8, offset=8)


def write_idx_images(path: str | Path, images: np.ndarray) -> None:
    """Serialize uint8 [N, rows, cols] to the IDX image layout."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", _IMAGE_MAGIC, n, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path: str | Path, labels: np.ndarray) -> None:
    """Serialize uint8 [N] to the IDX label layout."""
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", _LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def load_mnist(images_path: str | Path, labels_path: str | Path) -> MnistData:
    """Load one image/label file pair, enforcing 28x28 and matching counts."""
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[1:] != (28, 28):
        raise IdxFormatError(
            f"{images_path}: expected 28x28 images, got {images.shape[1:]}"
        )
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    return MnistData(images=images, labels=labels)


def features_from_images(images: np.ndarray) -> np.ndarray:
    """Flatten to rows, scale pixels to [0, 1], append a bias feature of 1."""
    flat = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return np.hstack([flat, np.ones((flat.shape[0], 1))])


def _select_members(raw: MnistData, class_a, class_b) -> tuple[np.ndarray, set, set]:
    a, b = set(int(c) for c in class_a), set(int(c) for c in class_b)
    if not a or not b:
        raise DataError("both class sets must be non-empty")
    if a & b:
        raise DataError(f"class sets overlap: {sorted(a & b)}")
    mask = np.isin(raw.labels, sorted(a | b))
    return np.flatnonzero(mask), a, b


def build_classification_task(
    raw: MnistData,
    class_a,
    class_b,
    D_k: int,
    rng: np.random.Generator,
) -> Dataset:
    """Draw one client's binary task: D_k images of the two class sets.

    Samples are drawn without replacement; label 1 means the digit belongs
    to class_a. Features are the flattened normalized pixels plus a bias
    term (dimension 785 for 28x28 inputs).
    """
    if D_k < 1:
        raise DataError(f"D_k must be >= 1, got {D_k}")
    idx, a, _ = _select_members(raw, class_a, class_b)
    if len(idx) < D_k:
        raise DataError(
            f"requested {D_k} samples but only {len(idx)} images of classes "
            f"{sorted(set(class_a) | set(class_b))} are available"
        )
    picked = idx[rng.choice(len(idx), size=D_k, replace=False)]
    X = features_from_images(raw.images[picked])
    y = np.isin(raw.labels[picked], sorted(a)).astype(float)
    return Dataset(X=X, y=y)


def build_test_set(
    raw: MnistData,
    class_a,
    class_b,
    cap: int,
    rng: np.random.Generator,
) -> Dataset:
    """Evaluation set for one cluster: up to `cap` held-out images."""
    idx, a, _ = _select_members(raw, class_a, class_b)
    if len(idx) == 0:
        raise DataError("no test images available for the requested classes")
    if len(idx) > cap:
        idx = idx[rng.choice(len(idx), size=cap, replace=False)]
    X = features_from_images(raw.images[idx])
    y = np.isin(raw.labels[idx], sorted(a)).astype(float)
    return Dataset(X=X, y=y)


def _upscale_digit(img8: np.ndarray) -> np.ndarray:
    """8x8 intensity grid (0..16) -> 28x28 uint8 (0..255)."""
    scaled = np.round(img8 * (255.0 / 16.0)).clip(0, 255).astype(np.uint8)
    big = np.kron(scaled, np.ones((3, 3), dtype=np.uint8))  # 24x24
    return np.pad(big, 2)


def ensure_bundled_digits(directory: str | Path) -> Path:
    """Build the bundled handwritten-digit IDX files if absent.

    Uses scikit-learn's digits scans. The per-class last quarter of
    occurrences becomes the test pool; the split is a pure function of the
    source data, so the generated bytes are identical on every machine.
    """
    directory = Path(directory)
    paths = [directory / n for n in (TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS)]
    if all(p.exists() for p in paths):
        return directory
    from sklearn.datasets import load_digits

    digits = load_digits()
    images = np.stack([_upscale_digit(img) for img in digits.images])
    labels = digits.target.astype(np.uint8)
    train_mask = np.ones(len(labels), dtype=bool)
    for c in range(10):
        members = np.flatnonzero(labels == c)
        n_test = len(members) // 4
        train_mask[members[len(members) - n_test :]] = False
    directory.mkdir(parents=True, exist_ok=True)
    write_idx_images(paths[0], images[train_mask])
    write_idx_labels(paths[1], labels[train_mask])
    write_idx_images(paths[2], images[~train_mask])
    write_idx_labels(paths[3], labels[~train_mask])
    return directory


def load_digit_data(mnist_dir: str | Path | None = None) -> tuple[MnistData, MnistData]:
    """Resolve and load (train, test) image data.

    Resolution order: explicit `mnist_dir`, then the PGFL_MNIST_DIR
    environment variable, then the bundled digit set (built on first use
    under ~/.cache/pgfl/digits).
    """
    directory = mnist_dir or os.environ.get("PGFL_MNIST_DIR")
    if directory is None:
        directory = ensure_bundled_digits(Path.home() / ".cache" / "pgfl" / "digits")
    directory = Path(directory)
    train = load_mnist(directory / TRAIN_IMAGES, directory / TRAIN_LABELS)
    test = load_mnist(directory / TEST_IMAGES, directory / TEST_LABELS)
    return train, test
