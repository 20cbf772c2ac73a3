"""Datasets and file outputs: IDX reading/writing, class filtering,
synthetic bars, PGM image grids and the training-log CSV."""
from __future__ import annotations

import csv
import math
import os
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ParseError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
RANGES = {"unit": (0.0, 1.0), "signed": (-1.0, 1.0)}
GUTTER = 2
CSV_HEADER = ("kind", "iteration", "loss", "penalty", "wasserstein")


@dataclass
class LabeledDataset:
    images: np.ndarray  # (count, H, W)
    labels: np.ndarray  # (count,)
    range_convention: str = "unit"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ConfigError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if self.range_convention not in RANGES:
            raise ConfigError(f"range_convention must be one of {tuple(RANGES)}")

    def __len__(self):
        return len(self.images)

    @property
    def image_shape(self) -> tuple[int, int]:
        return tuple(self.images.shape[1:])

    def to_range(self, convention: str) -> "LabeledDataset":
        if convention == self.range_convention:
            return self
        if convention not in RANGES:
            raise ConfigError(f"range_convention must be one of {tuple(RANGES)}")
        images = self.images * 2.0 - 1.0 if convention == "signed" else (self.images + 1.0) / 2.0
        return LabeledDataset(images, self.labels, convention)


def _read_header(buf: bytes, expected_magic: int, n_dims: int, path) -> tuple[int, ...]:
    if len(buf) < 4:
        raise ParseError(f"{path}: file too short for IDX magic", offset=len(buf))
    (magic,) = struct.unpack_from(">I", buf, 0)
    if magic != expected_magic:
        raise ParseError(
            f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}", offset=0
        )
    end = 4 + 4 * n_dims
    if len(buf) < end:
        raise ParseError(f"{path}: truncated IDX header", offset=len(buf))
    return struct.unpack_from(f">{n_dims}I", buf, 4)


def _payload(buf: bytes, dims, header_len: int, path) -> np.ndarray:
    total = math.prod(dims)
    if total > 2**34:
        raise ParseError(f"{path}: IDX dimensions {dims} overflow", offset=4)
    if len(buf) - header_len < total:
        raise ParseError(
            f"{path}: truncated payload, expected {total} bytes, found {len(buf) - header_len}",
            offset=len(buf),
        )
    return np.frombuffer(buf, dtype=np.uint8, count=total, offset=header_len)


def load_idx_images(path, range_convention: str = "unit") -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    dims = _read_header(buf, IDX_IMAGES_MAGIC, 3, path)
    raw = _payload(buf, dims, 16, path).reshape(dims).astype(np.float64)
    if range_convention == "unit":
        return raw / 255.0
    if range_convention == "signed":
        return 2.0 * raw / 255.0 - 1.0
    raise ConfigError(f"range_convention must be one of {tuple(RANGES)}")


def load_idx_labels(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    dims = _read_header(buf, IDX_LABELS_MAGIC, 1, path)
    return _payload(buf, dims, 8, path).astype(np.int64)


def write_idx_images(images, path):
    """Write images in [0, 1] as an IDX ubyte file (values rounded to bytes)."""
    images = np.asarray(images, dtype=np.float64)
    raw = np.clip(np.rint(images * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, *raw.shape))
        f.write(raw.tobytes())


def write_idx_labels(labels, path):
    labels = np.asarray(labels).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def filter_classes(images, labels, classes, per_class: int, range_convention="unit") -> LabeledDataset:
    """First ``per_class`` samples of each requested class, in file order."""
    if per_class < 1:
        raise ConfigError("per_class must be >= 1")
    labels = np.asarray(labels)
    keep = np.zeros(len(labels), dtype=bool)
    for c in sorted(set(classes)):
        where = np.flatnonzero(labels == c)
        if where.size == 0:
            raise ConfigError(f"class {c} has no samples")
        keep[where[:per_class]] = True
    return LabeledDataset(np.asarray(images)[keep], labels[keep], range_convention)


def synthetic_bars(size: int, n_per_class: int, rng: np.random.Generator) -> LabeledDataset:
    """Class 0: one full-height vertical bar; class 1: one full-width horizontal bar."""
    if size < 2:
        raise ConfigError("bar images need size >= 2")
    images = np.zeros((2 * n_per_class, size, size))
    cols = rng.integers(0, size, n_per_class)
    rows = rng.integers(0, size, n_per_class)
    for i, c in enumerate(cols):
        images[i, :, c] = 1.0
    for i, r in enumerate(rows):
        images[n_per_class + i, r, :] = 1.0
    labels = np.repeat([0, 1], n_per_class)
    return LabeledDataset(images, labels, "unit")


def load_dataset(images_path, labels_path, classes, per_class, range_convention="unit"):
    for p in (images_path, labels_path):
        if not os.path.exists(p):
            raise FileNotFoundError(p)
    images = load_idx_images(images_path, range_convention)
    labels = load_idx_labels(labels_path)
    if len(images) != len(labels):
        raise ParseError(f"{images_path} has {len(images)} images, {labels_path} {len(labels)} labels")
    return filter_classes(images, labels, classes, per_class, range_convention)


def grid_pixels(images, rows: int, cols: int, value_range=(0.0, 1.0)) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    if rows * cols > len(images):
        raise ConfigError(f"{rows}x{cols} grid needs {rows * cols} images, got {len(images)}")
    h, w = images.shape[1:]
    lo, hi = value_range
    scaled = np.clip((images - lo) / (hi - lo), 0.0, 1.0)
    out = np.zeros((rows * h + (rows - 1) * GUTTER, cols * w + (cols - 1) * GUTTER), np.uint8)
    for k in range(rows * cols):
        r, c = divmod(k, cols)
        top, left = r * (h + GUTTER), c * (w + GUTTER)
        out[top : top + h, left : left + w] = np.rint(255.0 * scaled[k]).astype(np.uint8)
    return out


def write_image_grid(images, rows: int, cols: int, path, value_range=(0.0, 1.0)):
    """Binary PGM (P5) of images tiled row-major with a 2-pixel black gutter."""
    pixels = grid_pixels(images, rows, cols, value_range)
    try:
        with open(path, "wb") as f:
            f.write(b"P5\n%d %d\n255\n" % (pixels.shape[1], pixels.shape[0]))
            f.write(pixels.tobytes())
    except OSError as exc:
        raise OSError(f"cannot write image grid to {path}: {exc}") from exc


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    parts = buf.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ParseError(f"{path}: not a binary PGM", offset=0)
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ParseError(f"{path}: unsupported maxval {maxval}")
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return format(float(v), ".17g")


def write_csv_log(log, path):
    """One row per record of ``log.records`` (or an iterable of records)."""
    records = getattr(log, "records", log)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow(
                [r.kind, r.iteration, _fmt(r.loss), _fmt(r.penalty), _fmt(r.wasserstein)]
            )


def read_csv_log(path) -> list[dict]:
    rows = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = tuple(next(reader))
        if header != CSV_HEADER:
            raise ParseError(f"{path}: unexpected header {header}")
        for kind, it, loss, pen, wd in reader:
            rows.append(
                {
                    "kind": kind,
                    "iteration": int(it),
                    "loss": float(loss) if loss else math.nan,
                    "penalty": float(pen) if pen else math.nan,
                    "wasserstein": float(wd) if wd else math.nan,
                }
            )
    return rows
