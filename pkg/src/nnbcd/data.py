"""Dataset loaders (IDX, CSV) and synthetic problem generators."""
from __future__ import annotations

import csv as csv_mod
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadMagic,
    CountMismatch,
    NonNumericCell,
    RaggedRows,
    ShapeMismatch,
    TruncatedFile,
)

# positive / total sample counts of the solar-flare training set that the
# imbalanced synthetic generator mimics
FLARE_POSITIVE_FRACTION = 4057 / 111050


@dataclass
class Dataset:
    x: np.ndarray                   # features, n_features x n_samples
    y: np.ndarray                   # targets, n_outputs x n_samples
    split: str = "train"
    class_names: list[str] | None = None
    one_hot: bool = False

    def __post_init__(self):
        if self.x.shape[1] != self.y.shape[1]:
            raise CountMismatch(
                f"{self.x.shape[1]} samples in X but {self.y.shape[1]} targets"
            )
        if not (np.isfinite(self.x).all() and np.isfinite(self.y).all()):
            raise ValueError("dataset contains NaN or Inf entries")
        if self.one_hot:
            col_sums = self.y.sum(axis=0)
            if not np.allclose(col_sums, 1.0):
                raise ValueError("one-hot targets must have columns summing to 1")

    @property
    def n_samples(self) -> int:
        return self.x.shape[1]

    def labels(self) -> np.ndarray:
        """Integer class labels (argmax over one-hot rows)."""
        return self.y.argmax(axis=0)

    def save(self, path) -> None:
        np.savez(path, x=self.x, y=self.y, split=self.split,
                 one_hot=self.one_hot,
                 class_names=np.array(self.class_names or [], dtype=object))

    @staticmethod
    def load(path) -> "Dataset":
        with np.load(path, allow_pickle=True) as z:
            names = list(z["class_names"]) or None
            return Dataset(z["x"], z["y"], str(z["split"]), names, bool(z["one_hot"]))


def _read_idx(path, expected_magic: int):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 4:
        raise TruncatedFile(f"{path}: too short for a magic number")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise BadMagic(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedFile(f"{path}: truncated dimension header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise TruncatedFile(f"{path}: expected {count} payload bytes, "
                            f"got {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path, flatten: bool = True,
             split: str = "train") -> Dataset:
    """Load an IDX image/label pair (big-endian, magic-numbered).

    Pixels are scaled to [0, 1]; images are flattened to columns unless
    `flatten` is off, and labels become one-hot over 10 classes.
    """
    images = _read_idx(images_path, 0x00000803)
    labels = _read_idx(labels_path, 0x00000801)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatch(f"{images.shape[0]} images but {labels.shape[0]} labels")
    n = images.shape[0]
    x = images.reshape(n, -1).T.astype(np.float64) / 255.0
    y = np.zeros((10, n))
    y[labels.astype(int), np.arange(n)] = 1.0
    ds = Dataset(x, y, split=split, class_names=[str(d) for d in range(10)],
                 one_hot=True)
    if not flatten:
        ds.x = images.transpose(1, 2, 0).astype(np.float64) / 255.0
    return ds


def load_csv(path, label_column, one_hot: bool = True,
             standardize: bool = True, split: str = "train") -> Dataset:
    """Load a rectangular numeric CSV with a header row.

    Features are standardized per column (constant columns keep std 1 to
    avoid division by zero); labels become one-hot in sorted label order.
    """
    with open(path, newline="") as f:
        reader = csv_mod.reader(f)
        header = next(reader)
        rows = list(reader)
    if isinstance(label_column, str):
        try:
            label_idx = header.index(label_column)
        except ValueError:
            raise NonNumericCell(f"no column named {label_column!r} in header")
    else:
        label_idx = int(label_column)
    width = len(header)
    data = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        if len(row) != width:
            raise RaggedRows(f"row {r + 2} has {len(row)} cells, expected {width}")
        try:
            data[r] = [float(c) for c in row]
        except ValueError as exc:
            raise NonNumericCell(f"row {r + 2}: {exc}") from exc
    labels = data[:, label_idx]
    feats = np.delete(data, label_idx, axis=1).T
    if standardize:
        mean = feats.mean(axis=1, keepdims=True)
        std = feats.std(axis=1, keepdims=True)
        std[std == 0] = 1.0
        feats = (feats - mean) / std
    if one_hot:
        classes = np.unique(labels)
        y = (labels[None, :] == classes[:, None]).astype(np.float64)
        names = [format(c) for c in classes]
        return Dataset(feats, y, split=split, class_names=names, one_hot=True)
    return Dataset(feats, labels[None, :], split=split)


def make_synthetic(kind: str, sizes, n_samples: int, seed: int,
                   split: str = "train", **kwargs) -> Dataset:
    """Generate a deterministic synthetic dataset.

    kinds:
      teacher-net: X gaussian; targets from a fixed random ReLU network with
        the given layer sizes (realizable regression).
      gaussian-blobs: one gaussian cluster per class, one-hot targets.
      imbalanced-binary: two classes at the solar-flare positive fraction
        (~3.65%), positives mean-shifted; 2-row one-hot targets.
    """
    rng = np.random.default_rng(seed)
    if kind == "teacher-net":
        dims = [int(d) for d in sizes]
        x = rng.standard_normal((dims[0], n_samples))
        v = x
        for a, b in zip(dims[:-1], dims[1:]):
            w = rng.standard_normal((b, a)) / np.sqrt(a)
            v = w @ v
            if b != dims[-1]:
                v = np.maximum(v, 0.0)
        return Dataset(x, v, split=split)
    if kind == "gaussian-blobs":
        n_features, n_classes = int(sizes[0]), int(sizes[-1])
        sep = kwargs.get("separation", 3.0)
        centers = sep * rng.standard_normal((n_classes, n_features))
        labels = rng.integers(0, n_classes, n_samples)
        x = centers[labels].T + rng.standard_normal((n_features, n_samples))
        y = np.zeros((n_classes, n_samples))
        y[labels, np.arange(n_samples)] = 1.0
        return Dataset(x, y, split=split,
                       class_names=[str(c) for c in range(n_classes)], one_hot=True)
    if kind == "imbalanced-binary":
        n_features = int(sizes[0])
        n_pos = int(round(FLARE_POSITIVE_FRACTION * n_samples))
        sep = kwargs.get("separation", 3.0)
        direction = rng.standard_normal(n_features)
        direction *= sep / np.linalg.norm(direction)
        labels = np.zeros(n_samples, dtype=int)
        labels[rng.permutation(n_samples)[:n_pos]] = 1
        x = rng.standard_normal((n_features, n_samples))
        x[:, labels == 1] += direction[:, None]
        y = np.zeros((2, n_samples))
        y[labels, np.arange(n_samples)] = 1.0
        return Dataset(x, y, split=split, class_names=["negative", "positive"],
                       one_hot=True)
    raise ValueError(f"unknown synthetic kind {kind!r}")
