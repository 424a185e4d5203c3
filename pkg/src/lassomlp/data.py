"""Datasets: synthetic nonlinear regression, MNIST IDX files, noise columns, splits."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .tensor import Rng, ShapeError

__all__ = [
    "Dataset",
    "SplitSpec",
    "IdxFormatError",
    "DATA_DIR_ENV",
    "synth_target",
    "make_synthetic",
    "read_idx",
    "write_idx",
    "load_mnist_idx",
    "find_mnist_files",
    "augment_gaussian",
    "filter_classes",
    "split",
    "to_csv",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
DATA_DIR_ENV = "LASSOMLP_DATA_DIR"


class IdxFormatError(ValueError):
    """Malformed or inconsistent IDX file."""


@dataclass
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    provenance: np.ndarray = None
    name: str = "dataset"
    # Original class labels behind a relabelled target (filter_classes).
    classes: tuple = field(default=None, compare=False)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.targets = np.asarray(self.targets)
        if self.features.ndim != 2:
            raise ShapeError(f"features must be 2-D, got {self.features.shape}")
        n, p = self.features.shape
        if self.targets.shape[0] != n:
            raise ShapeError(f"{n} feature rows but {self.targets.shape[0]} targets")
        if self.provenance is None:
            self.provenance = np.ones(p, dtype=np.int8)
        self.provenance = np.asarray(self.provenance, dtype=np.int8)
        if self.provenance.shape != (p,):
            raise ShapeError(f"provenance length {self.provenance.shape} != {p} columns")

    def __len__(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    @property
    def is_classification(self):
        return np.issubdtype(self.targets.dtype, np.integer)

    @property
    def n_classes(self):
        if not self.is_classification:
            raise TypeError("regression dataset has no classes")
        return int(self.targets.max()) + 1

    def subset(self, rows, name=None):
        rows = np.asarray(rows)
        return Dataset(
            self.features[rows],
            self.targets[rows],
            self.provenance,
            name or self.name,
            self.classes,
        )

    def select_columns(self, cols):
        cols = np.asarray(cols, dtype=np.int64)
        return Dataset(
            self.features[:, cols],
            self.targets,
            self.provenance[cols],
            self.name,
            self.classes,
        )


@dataclass(frozen=True)
class SplitSpec:
    """Either ``train_fraction`` in (0, 1) or an absolute ``train_count``."""

    train_fraction: float = None
    train_count: int = None
    seed: int = 0

    def __post_init__(self):
        if (self.train_fraction is None) == (self.train_count is None):
            raise ValueError("give exactly one of train_fraction or train_count")
        if self.train_fraction is not None and not 0 < self.train_fraction < 1:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")

    def n_train(self, n_total):
        if self.train_count is not None:
            return int(self.train_count)
        return max(1, int(np.floor(self.train_fraction * n_total)))


def synth_target(x):
    """``sin(x0) * exp(-x1) + (x2 - 0.2)**2``; works row-wise on a matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 3:
        raise ShapeError("synthetic target needs at least 3 features")
    x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
    return np.sin(x0) * np.exp(-x1) + (x2 - 0.2) ** 2


def make_synthetic(n, p=256, seed=0) -> Dataset:
    if p < 3:
        raise ValueError("p must be >= 3")
    rng = Rng(seed)
    features = rng.normal(n * p).reshape(n, p)
    provenance = np.zeros(p, dtype=np.int8)
    provenance[:3] = 1
    return Dataset(features, synth_target(features), provenance, f"synthetic-n{n}-p{p}")


def _open_bytes(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx(path, expect_magic=None) -> np.ndarray:
    """Parse an unsigned-byte IDX file (gzip-compressed files are accepted)."""
    raw = _open_bytes(path)
    if len(raw) < 8:
        raise IdxFormatError(f"{path}: file is {len(raw)} bytes, too short for an IDX header (offset 0)")
    magic, = struct.unpack(">I", raw[:4])
    if expect_magic is not None and magic != expect_magic:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08x} at offset 0, expected 0x{expect_magic:08x}"
        )
    if magic >> 16 != 0 or (magic >> 8) & 0xFF != 0x08:
        raise IdxFormatError(f"{path}: unsupported IDX type 0x{magic:08x} at offset 0")
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise IdxFormatError(f"{path}: truncated header, need {header_end} bytes, have {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header_end])
    n_bytes = int(np.prod(dims, dtype=np.int64))
    if len(raw) - header_end < n_bytes:
        raise IdxFormatError(
            f"{path}: truncated data at offset {len(raw)}, header declares {n_bytes} bytes "
            f"starting at offset {header_end}"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=n_bytes, offset=header_end).reshape(dims)


def write_idx(path, array, compress=None):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">I", 0x0800 | array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    payload = header + array.tobytes()
    path = Path(path)
    if compress is None:
        compress = path.suffix == ".gz"
    if compress:
        payload = gzip.compress(payload, mtime=0)
    path.write_bytes(payload)


def load_mnist_idx(images_path, labels_path) -> Dataset:
    images = read_idx(images_path, IMAGE_MAGIC)
    labels = read_idx(labels_path, LABEL_MAGIC)
    if images.ndim != 3:
        raise IdxFormatError(f"{images_path}: image file must have 3 dimensions, has {images.ndim}")
    if labels.ndim != 1:
        raise IdxFormatError(f"{labels_path}: label file must have 1 dimension, has {labels.ndim}")
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"{images.shape[0]} images in {images_path} but {labels.shape[0]} labels in {labels_path} "
            "(item count at offset 4)"
        )
    n = images.shape[0]
    features = images.reshape(n, -1).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.int64), None, "mnist")


def find_mnist_files(data_dir=None):
    """Locate the training image/label IDX pair in ``data_dir``.

    Falls back to the ``LASSOMLP_DATA_DIR`` environment variable.
    """
    data_dir = data_dir or os.environ.get(DATA_DIR_ENV)
    if not data_dir:
        raise FileNotFoundError(
            f"no MNIST directory given; pass --data-dir or set {DATA_DIR_ENV} to a directory "
            "holding train-images-idx3-ubyte[.gz] and train-labels-idx1-ubyte[.gz]"
        )
    data_dir = Path(data_dir)
    found = []
    for stem in ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"):
        for cand in (data_dir / stem, data_dir / f"{stem}.gz", data_dir / stem.replace("-idx", ".idx")):
            if cand.exists():
                found.append(cand)
                break
        else:
            raise FileNotFoundError(f"{stem}[.gz] not found in {data_dir}")
    return tuple(found)


def augment_gaussian(d: Dataset, extra, seed=0) -> Dataset:
    """Append ``extra`` i.i.d. standard normal columns flagged as noise."""
    if extra < 0:
        raise ValueError("extra must be >= 0")
    if extra == 0:
        return d
    noise = Rng(seed).normal(len(d) * extra).reshape(len(d), extra)
    return Dataset(
        np.hstack([d.features, noise]),
        d.targets,
        np.concatenate([d.provenance, np.zeros(extra, dtype=np.int8)]),
        f"{d.name}+gauss{extra}",
        d.classes,
    )


def filter_classes(d: Dataset, classes, relabel=True) -> Dataset:
    classes = sorted(set(int(c) for c in classes))
    if not classes:
        raise ValueError("no classes given")
    rows = np.flatnonzero(np.isin(d.targets, classes))
    if rows.size == 0:
        raise ValueError(f"none of the classes {classes} occur in {d.name}")
    targets = d.targets[rows]
    if relabel:
        targets = np.searchsorted(np.asarray(classes), targets).astype(np.int64)
    name = f"{d.name}[{'-'.join(map(str, classes))}]"
    return Dataset(d.features[rows], targets, d.provenance, name, tuple(classes) if relabel else d.classes)


def split(d: Dataset, spec: SplitSpec):
    """Seeded, unstratified train/test partition of the rows."""
    n = len(d)
    n_train = spec.n_train(n)
    if not 1 <= n_train < n:
        raise ValueError(f"split of {n} rows into {n_train} training rows leaves one side empty")
    order = Rng(spec.seed).permutation(n)
    train_rows = np.sort(order[:n_train])
    test_rows = np.sort(order[n_train:])
    return d.subset(train_rows, f"{d.name}/train"), d.subset(test_rows, f"{d.name}/test")


def to_csv(d: Dataset, path):
    p = d.n_features
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join([f"f{j}" for j in range(p)] + ["target"]) + "\n")
        for row, t in zip(d.features, d.targets):
            t = str(int(t)) if d.is_classification else repr(float(t))
            fh.write(",".join(repr(float(v)) for v in row) + f",{t}\n")
