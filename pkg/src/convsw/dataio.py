"""Dataset ingestion, class splits and report serialisation.

File formats
------------
IDX (big-endian): images ``00 00 08 03`` + u32 count, rows, cols + ubyte
pixels; labels ``00 00 08 01`` + u32 count + ubyte labels.  ``.gz`` files
are decompressed transparently.

CSWT (little-endian): ``b"CSWT"``, u32 version (1), u32 n, c, d1, d2, then
``n*c*d1*d2`` float64 values, row-major per support.
"""
import csv
import gzip
import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError
from .tensor import as_measure

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CSWT_MAGIC = b"CSWT"
CSWT_VERSION = 1
MAX_IDX_ITEMS = 1 << 31

NORMALIZATIONS = ("none", "unit", "signed")


def _read_bytes(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def normalize_pixels(pixels, mode="unit"):
    """Map ubyte pixels to reals: ``none`` 0..255, ``unit`` [0, 1], ``signed`` [-1, 1]."""
    x = np.asarray(pixels, dtype=np.float64)
    if mode == "none":
        return x
    if mode == "unit":
        return x / 255.0
    if mode == "signed":
        return x / 127.5 - 1.0
    raise ValueError(f"unknown normalization {mode!r}; choose from {NORMALIZATIONS}")


def _idx_header(raw, magic, ndims, path):
    need = 4 + 4 * ndims
    if len(raw) < 4:
        raise FormatError(f"{path}: file too short for an IDX header")
    got = struct.unpack(">I", raw[:4])[0]
    if got != magic:
        raise FormatError(f"{path}: bad IDX magic 0x{got:08x}, expected 0x{magic:08x}")
    if len(raw) < need:
        raise FormatError(f"{path}: file too short for an IDX header")
    dims = struct.unpack(f">{ndims}I", raw[4:need])
    total = 1
    for v in dims:
        total *= v
    if total > MAX_IDX_ITEMS:
        raise FormatError(f"{path}: IDX dimensions {dims} overflow the supported size")
    if len(raw) - need < total:
        raise FormatError(
            f"{path}: truncated payload, header declares {total} bytes, found {len(raw) - need}")
    return dims, need


def read_idx_images(path, normalization="unit"):
    """IDX image file -> ``(n, 1, rows, cols)`` float64 array."""
    raw = _read_bytes(path)
    (count, rows, cols), start = _idx_header(raw, IDX_IMAGES_MAGIC, 3, path)
    if rows != cols:
        raise ShapeError(f"{path}: only square images are supported, got {rows}x{cols}")
    pixels = np.frombuffer(raw, dtype=np.uint8, count=count * rows * cols, offset=start)
    return normalize_pixels(pixels, normalization).reshape(count, 1, rows, cols)


def read_idx_labels(path):
    raw = _read_bytes(path)
    (count,), start = _idx_header(raw, IDX_LABELS_MAGIC, 1, path)
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=start).astype(np.int64)


def write_idx_images(path, pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    n, rows, cols = pixels.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, n, rows, cols))
        f.write(pixels.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.size))
        f.write(labels.tobytes())


def write_tensor_file(path, measure):
    x = np.asarray(measure, dtype=np.float64)
    if x.ndim == 4 and x.shape[0] == 0:
        raise ShapeError("refusing to write an empty measure")
    x = as_measure(x)
    n, c, d1, d2 = x.shape
    with open(path, "wb") as f:
        f.write(CSWT_MAGIC)
        f.write(struct.pack("<5I", CSWT_VERSION, n, c, d1, d2))
        f.write(x.astype("<f8").tobytes())


def read_tensor_file(path):
    """CSWT file -> ``(n, c, d, d)`` float64 array."""
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 24 or raw[:4] != CSWT_MAGIC:
        raise FormatError(f"{path}: not a CSWT tensor file")
    version, n, c, d1, d2 = struct.unpack("<5I", raw[4:24])
    if version != CSWT_VERSION:
        raise FormatError(f"{path}: unsupported CSWT version {version}")
    if n == 0:
        raise FormatError(f"{path}: empty measure")
    if d1 != d2:
        raise ShapeError(f"{path}: only square supports are supported, got {d1}x{d2}")
    expected = n * c * d1 * d2 * 8
    if len(raw) - 24 != expected:
        raise FormatError(
            f"{path}: payload is {len(raw) - 24} bytes, shape ({n},{c},{d1},{d2}) needs {expected}")
    data = np.frombuffer(raw, dtype="<f8", offset=24).astype(np.float64)
    return as_measure(data.reshape(n, c, d1, d2))


@dataclass(frozen=True)
class ClassSplit:
    full: np.ndarray
    half_a: np.ndarray
    half_b: np.ndarray
    indices: np.ndarray  # dataset rows used for ``full``; halves split it in order


def split_by_class(images, labels, per_class=None, seed=42):
    """Per-class measures of ``per_class`` supports and two disjoint halves.

    ``per_class=None`` uses the smallest class population so every class
    measure has the same size.
    """
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.shape[0] != labels.shape[0]:
        raise ShapeError("images and labels differ in length")
    classes, counts = np.unique(labels, return_counts=True)
    if per_class is None:
        per_class = int(counts.min())
    per_class = int(per_class)
    need = max(per_class, 2)
    rng = np.random.default_rng([int(seed), 0x5E1EC7])
    out = {}
    for cls, count in zip(classes, counts):
        if count < need:
            raise ValueError(f"class {cls} has {count} images, need at least {need}")
        rows = np.flatnonzero(labels == cls)
        chosen = rows[rng.permutation(rows.size)[:per_class]]
        half = per_class // 2
        out[int(cls)] = ClassSplit(images[chosen], images[chosen[:half]],
                                   images[chosen[half:2 * half]], chosen)
    return out


@dataclass
class DistanceMatrixReport:
    spec: dict
    normalization: str
    param_count: int
    runtime_ms: float
    classes: list
    matrix: np.ndarray
    std: np.ndarray = None
    repeats: int = 1
    variant: str = None
    nonlinear: bool = False

    def as_dict(self):
        out = {
            "method": self.spec["method"],
            "variant": self.variant,
            "nonlinear": self.nonlinear,
            "p": self.spec["p"],
            "L": self.spec["L"],
            "k": self.spec["k"],
            "steps": self.spec["steps"],
            "lr": self.spec["lr"],
            "seed": self.spec["seed"],
            "normalization": self.normalization,
            "param_count": self.param_count,
            "runtime_ms": self.runtime_ms,
            "matrix": np.asarray(self.matrix).tolist(),
            "classes": list(self.classes),
            "repeats": self.repeats,
        }
        if self.std is not None:
            out["std"] = np.asarray(self.std).tolist()
        return out

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class"] + [str(c) for c in self.classes])
        for cls, row in zip(self.classes, np.asarray(self.matrix)):
            w.writerow([str(cls)] + ["%.17g" % v for v in row])
        return buf.getvalue()


def read_csv_matrix(text):
    rows = list(csv.reader(io.StringIO(text)))
    classes = rows[0][1:]
    values = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return classes, values
