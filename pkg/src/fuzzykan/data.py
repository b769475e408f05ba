"""Dataset loading: IDX (MNIST/FashionMNIST) and CIFAR-10 binary formats.

Both readers are bit-exact parsers of the official binary layouts; pixels
are scaled to [0,1] and 28x28 grayscale images are zero-padded to 32x32
(bilinear resize available as an alternative).  Gzipped files are read
transparently.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073
CIFAR_RECORDS_PER_FILE = 10000


class DataError(Exception):
    """Base class for dataset file problems."""


class BadMagicError(DataError):
    pass


class TruncatedFileError(DataError):
    pass


class CountMismatchError(DataError):
    pass


class BadLabelError(DataError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # [M, C, H, W] floats in [0,1]
    labels: np.ndarray  # [M] int64 class indices
    split: str
    name: str

    def __len__(self):
        return len(self.labels)

    def subset(self, count: int) -> "Dataset":
        return Dataset(self.images[:count], self.labels[:count], self.split, self.name)


def _read_bytes(path) -> bytes:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _parse_idx(raw: bytes, expected_magic: int, path) -> np.ndarray:
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise BadMagicError(f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedFileError(f"{path}: truncated dimension header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) < header + count:
        raise TruncatedFileError(
            f"{path}: expected {count} data bytes, file holds {len(raw) - header}"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path, split: str = "train", name: str = "mnist") -> Dataset:
    """Read an IDX image/label file pair into a normalized Dataset."""
    images = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, images_path)
    labels = _parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, labels_path)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images_path}: {images.shape[0]} images but {labels.shape[0]} labels"
        )
    m, h, w = images.shape
    return Dataset(
        images=images.reshape(m, 1, h, w).astype(np.float64) / 255.0,
        labels=labels.astype(np.int64),
        split=split,
        name=name,
    )


def write_idx_images(path, images: np.ndarray):
    """Write uint8 images [M,H,W] in IDX layout (test fixtures, round-trips)."""
    m, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, m, h, w))
        f.write(np.ascontiguousarray(images, dtype=np.uint8).tobytes())


def write_idx_labels(path, labels: np.ndarray):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        f.write(np.ascontiguousarray(labels, dtype=np.uint8).tobytes())


def _parse_cifar_file(path) -> tuple[np.ndarray, np.ndarray]:
    raw = _read_bytes(path)
    if len(raw) != CIFAR_RECORDS_PER_FILE * CIFAR_RECORD_BYTES:
        raise TruncatedFileError(
            f"{path}: size {len(raw)} != {CIFAR_RECORDS_PER_FILE * CIFAR_RECORD_BYTES}"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(CIFAR_RECORDS_PER_FILE, CIFAR_RECORD_BYTES)
    labels = records[:, 0]
    if labels.max() > 9:
        raise BadLabelError(f"{path}: label byte {labels.max()} out of range")
    images = records[:, 1:].reshape(-1, 3, 32, 32)
    return images, labels


def parse_cifar_records(raw: bytes, n_records: int) -> tuple[np.ndarray, np.ndarray]:
    """Parse raw CIFAR-10 records without the per-file size check (fixtures)."""
    records = np.frombuffer(raw, dtype=np.uint8).reshape(n_records, CIFAR_RECORD_BYTES)
    return records[:, 1:].reshape(-1, 3, 32, 32), records[:, 0]


def load_cifar10(dir_path, split: str = "train") -> Dataset:
    """Read the five training batches or the test batch of binary CIFAR-10."""
    root = Path(dir_path)
    if (root / "cifar-10-batches-bin").is_dir():
        root = root / "cifar-10-batches-bin"
    if split == "train":
        files = [root / f"data_batch_{i}.bin" for i in range(1, 6)]
    else:
        files = [root / "test_batch.bin"]
    for f in files:
        if not f.exists():
            raise DataError(f"missing CIFAR-10 file: {f}")
    images, labels = zip(*(_parse_cifar_file(f) for f in files))
    return Dataset(
        images=np.concatenate(images).astype(np.float64) / 255.0,
        labels=np.concatenate(labels).astype(np.int64),
        split=split,
        name="cifar10",
    )


def pad_to_32(images: np.ndarray) -> np.ndarray:
    """Zero-pad [M,1,28,28] images by 2 pixels per border to [M,1,32,32]."""
    if images.ndim != 4 or images.shape[1:] != (1, 28, 28):
        raise ValueError(f"expected [M,1,28,28], got {images.shape}")
    return np.pad(images, ((0, 0), (0, 0), (2, 2), (2, 2)))


def resize_bilinear_to_32(images: np.ndarray) -> np.ndarray:
    """Bilinear 28->32 resize, the alternative to zero-padding."""
    if images.ndim != 4 or images.shape[2:] != (28, 28):
        raise ValueError(f"expected [M,C,28,28], got {images.shape}")
    src = np.linspace(0.0, 27.0, 32)
    lo = np.floor(src).astype(int)
    hi = np.minimum(lo + 1, 27)
    frac = src - lo
    rows = images[:, :, lo, :] * (1 - frac)[None, None, :, None] + images[:, :, hi, :] * frac[None, None, :, None]
    out = rows[:, :, :, lo] * (1 - frac)[None, None, None, :] + rows[:, :, :, hi] * frac[None, None, None, :]
    return out


def to_model_input(ds: Dataset, resize: str = "pad") -> Dataset:
    """Bring a dataset to the 32x32 input geometry the models expect."""
    if ds.images.shape[2:] == (32, 32):
        return ds
    if resize == "pad":
        images = pad_to_32(ds.images)
    elif resize == "bilinear":
        images = resize_bilinear_to_32(ds.images)
    else:
        raise ValueError(f"unknown resize mode {resize!r}")
    return Dataset(images, ds.labels, ds.split, ds.name)


IDX_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _find_idx_file(directory: Path, stem: str) -> Path:
    for candidate in (directory / stem, directory / f"{stem}.gz"):
        if candidate.exists():
            return candidate
    raise DataError(f"missing dataset file: {directory / stem}[.gz]")


def load_dataset(name: str, data_dir, split: str = "train", resize: str = "pad") -> Dataset:
    """Load mnist / fashion-mnist / cifar10 from `data_dir`/<name>/."""
    root = Path(data_dir)
    if name == "cifar10":
        for candidate in (root / "cifar10", root):
            try:
                return load_cifar10(candidate, split)
            except DataError:
                continue
        raise DataError(f"CIFAR-10 binary batches not found under {root}")
    if name in ("mnist", "fashion-mnist"):
        directory = root / name if (root / name).is_dir() else root
        img_stem, lbl_stem = IDX_FILES[split]
        ds = load_idx(
            _find_idx_file(directory, img_stem),
            _find_idx_file(directory, lbl_stem),
            split=split,
            name=name,
        )
        return to_model_input(ds, resize)
    raise ValueError(f"unknown dataset {name!r}")


class BatchIterator:
    """One epoch over a dataset in seeded-permutation order.

    The final partial batch is emitted as-is so every sample is visited
    exactly once.
    """

    def __init__(self, dataset: Dataset, batch_size: int, seed: int = 0, shuffle: bool = True):
        if batch_size < 1:
            raise ValueError("batch size must be >= 1")
        self.dataset = dataset
        self.batch_size = batch_size
        m = len(dataset)
        if shuffle:
            self.permutation = np.random.default_rng(seed).permutation(m)
        else:
            self.permutation = np.arange(m)

    def __len__(self):
        return -(-len(self.dataset) // self.batch_size)

    def __iter__(self):
        for start in range(0, len(self.dataset), self.batch_size):
            idx = self.permutation[start : start + self.batch_size]
            yield self.dataset.images[idx], self.dataset.labels[idx]


def batches(dataset: Dataset, batch_size: int, seed: int = 0, shuffle: bool = True) -> BatchIterator:
    return BatchIterator(dataset, batch_size, seed=seed, shuffle=shuffle)
