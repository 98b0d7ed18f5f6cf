"""Datasets: synthetic generators in the unit box and an IDX (MNIST) reader."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

# apex and half-slope of the wedge dataset, in the first two coordinates
WEDGE_APEX = (0.5, 0.35)
WEDGE_SLOPE = 1.0


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    name: str = "dataset"
    n_classes: int = 0

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("inputs must be (n, d) and labels (n,)")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ValueError("inputs and labels differ in length")
        if self.inputs.size and (self.inputs.min() < 0.0 or self.inputs.max() > 1.0):
            raise ValueError("inputs must lie in the unit box")
        if not self.n_classes:
            self.n_classes = int(self.labels.max()) + 1 if self.labels.size else 2
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError("labels out of range")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dim(self) -> int:
        return int(self.inputs.shape[1])

    def head(self, n: int) -> "Dataset":
        return Dataset(self.inputs[:n], self.labels[:n], self.name, self.n_classes)


def wedge_label(X) -> np.ndarray:
    """1 inside the upward wedge v > apex_v + slope * |u - apex_u|, else 0."""
    X = np.atleast_2d(X)
    u, v = X[:, 0], X[:, 1]
    return (v > WEDGE_APEX[1] + WEDGE_SLOPE * np.abs(u - WEDGE_APEX[0])).astype(np.int64)


def annulus_label(X) -> np.ndarray:
    X = np.atleast_2d(X)
    r = np.hypot(X[:, 0] - 0.5, X[:, 1] - 0.5)
    return ((r > 0.2) & (r < 0.4)).astype(np.int64)


def synth_dataset(kind: str, d: int, n: int, seed: int, n_classes: int = 2) -> Dataset:
    """Deterministic toy data in [0, 1]^d.

    ``blobs``: Gaussian clusters (std 0.06) around well separated centres.
    ``wedge``: uniform points, class 1 inside a right-angled wedge whose
    boundary is two half-line segments meeting at an apex.
    ``annulus``: uniform points, class 1 inside a ring of radii 0.2 and 0.4.
    Wedge and annulus labels depend on the first two coordinates only.
    """
    if d < 2 or n < 10:
        raise ValueError("need d >= 2 and n >= 10")
    rng = np.random.default_rng(seed)
    if kind == "blobs":
        if n_classes < 2:
            raise ValueError("blobs needs at least two classes")
        labels = np.arange(n) % n_classes
        rng.shuffle(labels)
        if n_classes == 2:
            centres = np.array([np.full(d, 0.2), np.full(d, 0.8)])
        else:
            angles = 2 * np.pi * np.arange(n_classes) / n_classes
            centres = np.full((n_classes, d), 0.5)
            centres[:, 0] += 0.35 * np.cos(angles)
            centres[:, 1] += 0.35 * np.sin(angles)
        X = centres[labels] + rng.normal(0.0, 0.06, size=(n, d))
        return Dataset(np.clip(X, 0.0, 1.0), labels, "blobs", n_classes)
    if kind == "wedge":
        X = rng.uniform(0.0, 1.0, size=(n, d))
        return Dataset(X, wedge_label(X), "wedge", 2)
    if kind == "annulus":
        X = rng.uniform(0.0, 1.0, size=(n, d))
        return Dataset(X, annulus_label(X), "annulus", 2)
    raise ValueError(f"unknown dataset kind {kind!r}")


class IdxError(ValueError):
    pass


class IdxMagicError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxCountMismatchError(IdxError):
    pass


def _read_idx(path, magic: int, ndims: int) -> np.ndarray:
    raw = Path(path).read_bytes()
    header = 4 * (1 + ndims)
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: file shorter than the magic number")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise IdxMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(raw) < header:
        raise IdxTruncatedError(f"{path}: truncated header")
    shape = struct.unpack(f">{ndims}I", raw[4:header])
    size = int(np.prod(shape))
    if len(raw) - header < size:
        raise IdxTruncatedError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(shape)


def load_idx(images_path, labels_path, n_classes: int = 10) -> Dataset:
    """Read an IDX image/label pair; pixels are scaled to [0, 1] and flattened."""
    images = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return Dataset(X, labels.astype(np.int64), Path(images_path).stem, n_classes)


def write_idx(images: np.ndarray, labels: np.ndarray, images_path, labels_path) -> None:
    """Write uint8 images ``(n, rows, cols)`` and labels ``(n,)`` as IDX files."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    Path(images_path).write_bytes(struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape) + images.tobytes())
    Path(labels_path).write_bytes(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]) + labels.tobytes())
