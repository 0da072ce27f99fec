"""Dataset loading (delimited text, IDX), standardisation and synthetic data."""
from __future__ import annotations

import csv
import gzip
import math
import struct
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DataFormatError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
SD_FLOOR = 1e-12


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    name: str = ""
    # ("file", path) or ("synthetic", seed, generator_id)
    provenance: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise DataFormatError("dataset needs at least one row of features")
        if y.shape != (X.shape[0],):
            raise DataFormatError(f"expected {X.shape[0]} labels, got {y.shape}")
        if not np.all(np.isfinite(X)):
            raise DataFormatError("non-finite feature values")
        if not np.all((y == 0) | (y == 1)):
            raise DataFormatError("labels must be binary 0/1")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def with_intercept(self) -> "Dataset":
        X = np.hstack([self.features, np.ones((self.n, 1))])
        return replace(self, features=X)


def _open_text(path):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, "rt", newline="")
    return open(path, newline="")


def load_delimited(
    path,
    delimiter: str = ",",
    has_header: bool = True,
    label_column: int | str = -1,
    positive_label: str = "1",
) -> Dataset:
    """Read a delimited text file; rows whose label equals ``positive_label``
    get label 1, all others 0. ``label_column`` is a header name or an index
    (negative indices count from the end)."""
    with _open_text(path) as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataFormatError(f"empty file: {path}")
    header = rows.pop(0) if has_header else None
    if not rows:
        raise DataFormatError(f"no data rows in {path}")
    width = len(header) if header is not None else len(rows[0])

    if isinstance(label_column, str) and not _is_int(label_column):
        if header is None:
            raise ConfigError("label column given by name but the file has no header")
        names = [h.strip() for h in header]
        if label_column not in names:
            raise ConfigError(f"label column {label_column!r} not in header {names}")
        col = names.index(label_column)
    else:
        col = int(label_column)
        if not -width <= col < width:
            raise ConfigError(f"label column index {col} out of range for {width} columns")
        col %= width

    features, labels = [], []
    first_line = 2 if has_header else 1
    for i, row in enumerate(rows):
        line = first_line + i
        if len(row) != width:
            raise DataFormatError(f"expected {width} fields, found {len(row)}", f"row {line}")
        vals = []
        for j, cell in enumerate(row):
            if j == col:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(f"non-numeric feature {cell!r}", f"row {line}, column {j + 1}") from None
            if not math.isfinite(v):
                raise DataFormatError(f"non-finite feature {cell!r}", f"row {line}, column {j + 1}")
            vals.append(v)
        features.append(vals)
        labels.append(1.0 if _label_matches(row[col], positive_label) else 0.0)
    return Dataset(np.array(features), np.array(labels), name=str(path), provenance=("file", str(path)))


def _label_matches(cell: str, positive) -> bool:
    """Numeric labels compare by value ("+1" == "1.0"), others as text."""
    cell, positive = cell.strip(), str(positive).strip()
    try:
        return float(cell) == float(positive)
    except ValueError:
        return cell == positive


def _is_int(s: str) -> bool:
    try:
        int(s)
    except ValueError:
        return False
    return True


def parity_rule(digits: np.ndarray) -> np.ndarray:
    """Even digits -> 1, odd -> 0."""
    return (np.asarray(digits) % 2 == 0).astype(float)


def _read_bytes(path) -> bytes:
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as fh:
        return fh.read()


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Parse an unsigned-byte IDX file into an array of its declared shape."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise DataFormatError("truncated IDX header", f"{path}: byte 0")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise DataFormatError(f"bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}", f"{path}: byte 0")
    ndim = magic & 0xFF
    head = 4 + 4 * ndim
    if len(raw) < head:
        raise DataFormatError("truncated IDX dimension block", f"{path}: byte {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:head])
    size = int(np.prod(dims, dtype=np.int64))
    if len(raw) - head < size:
        raise DataFormatError(
            f"truncated IDX payload: {len(raw) - head} of {size} bytes", f"{path}: byte {len(raw)}"
        )
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=head).reshape(dims)


def load_idx_pair(images_path, labels_path, rule=parity_rule) -> Dataset:
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    digits = read_idx(labels_path, IDX_LABELS_MAGIC)
    if digits.shape[0] != images.shape[0]:
        raise DataFormatError(f"{digits.shape[0]} labels for {images.shape[0]} images", str(labels_path))
    X = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return Dataset(X, rule(digits), name=str(images_path), provenance=("file", str(images_path)))


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as IDX (used for fixtures)."""
    a = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | a.ndim
    with open(path, "wb") as fh:
        fh.write(struct.pack(f">I{a.ndim}I", magic, *a.shape))
        fh.write(a.tobytes())


def standardize(dataset: Dataset):
    """Columnwise (x - mean) / sd with the population sd floored at 1e-12."""
    X = dataset.features
    if X.shape[0] < 2:
        raise ConfigError("standardize needs at least two rows")
    mean = X.mean(axis=0)
    sd = np.maximum(X.std(axis=0), SD_FLOOR)
    Z = (X - mean) / sd
    # constant columns: force exact zeros instead of rounding residue / floor
    Z[:, X.std(axis=0) < SD_FLOOR] = 0.0
    return replace(dataset, features=Z), mean, sd


def synth_logistic(seed: int, n: int, d: int, separation: float) -> Dataset:
    """Two unit-variance Gaussian clouds centred at +/- (separation/2) u with
    u = (1, ..., 1)/sqrt(d); the first ceil(n/2) rows are class 1."""
    if n < 2 or d < 1:
        raise ConfigError("synth_logistic needs n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    u = np.ones(d) / math.sqrt(d)
    n_pos = (n + 1) // 2
    y = np.zeros(n)
    y[:n_pos] = 1.0
    sign = np.where(y == 1.0, 1.0, -1.0)
    X = rng.standard_normal((n, d)) + np.outer(sign * 0.5 * separation, u)
    return Dataset(X, y, name=f"synth(seed={seed},n={n},d={d},sep={separation})",
                   provenance=("synthetic", seed, "two-gaussians-v1"))
