"""Fixed-layout binary image datasets and the synthetic-shapes generator.

File layout (little-endian)::

    "CDLD" | version u32 | count u64 | H u32 | W u32 | C u32 | class_count u32
    then per record: label u8 | H*W*C pixel bytes (u8, row-major HWC)
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import stream

MAGIC = b"CDLD"
VERSION = 1
_HEADER = struct.Struct("<4sIQIIII")

SHAPE_CLASSES = ("disk", "square", "triangle", "cross")


class DatasetFormatError(ValueError):
    """Malformed dataset file."""


@dataclass(frozen=True)
class DatasetHeader:
    count: int
    height: int
    width: int
    channels: int
    class_count: int
    version: int = VERSION

    @property
    def record_size(self) -> int:
        return 1 + self.height * self.width * self.channels

    @property
    def file_size(self) -> int:
        return _HEADER.size + self.count * self.record_size


def write_dataset(path, images: np.ndarray, labels, class_count: int) -> DatasetHeader:
    """Quantize ``images`` (N, H, W, C) in [0, 1] to bytes and write them."""
    images = np.asarray(images)
    labels = np.asarray(labels, dtype=np.int64)
    if images.ndim != 4 or len(labels) != len(images):
        raise ValueError(f"need (N, H, W, C) images and N labels, got {images.shape} / {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= class_count or class_count > 256):
        raise ValueError("labels must lie in [0, class_count) and class_count <= 256")
    n, h, w, c = images.shape
    header = DatasetHeader(n, h, w, c, class_count)
    pix = np.clip(np.rint(np.asarray(images, np.float64) * 255.0), 0, 255).astype(np.uint8).reshape(n, -1)
    records = np.concatenate([labels.astype(np.uint8)[:, None], pix], axis=1)
    path = Path(path)
    try:
        with open(path, "wb") as f:
            f.write(_HEADER.pack(MAGIC, VERSION, n, h, w, c, class_count))
            f.write(records.tobytes())
    except OSError as e:
        raise OSError(f"cannot write dataset {path}: {e.strerror}") from e
    return header


def read_header(path) -> DatasetHeader:
    """Parse only the fixed-size header."""
    with open(path, "rb") as f:
        raw = f.read(_HEADER.size)
    if len(raw) < _HEADER.size:
        raise DatasetFormatError(f"{path}: header truncated at byte {len(raw)} (need {_HEADER.size})")
    magic, version, n, h, w, c, k = _HEADER.unpack(raw)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r} at byte 0")
    if version != VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version} at byte 4")
    return DatasetHeader(n, h, w, c, k, version)


def load_dataset(path) -> tuple[np.ndarray, np.ndarray]:
    """Return float32 images in [0, 1] and int64 labels."""
    header = read_header(path)
    actual = os.path.getsize(path)
    if actual != header.file_size:
        raise DatasetFormatError(
            f"{path}: expected {header.file_size} bytes for {header.count} records, found {actual}"
            f" (data ends at byte offset {actual})"
        )
    raw = np.fromfile(path, dtype=np.uint8, offset=_HEADER.size).reshape(header.count, header.record_size)
    labels = raw[:, 0].astype(np.int64)
    if labels.size and labels.max() >= header.class_count:
        bad = int(np.argmax(labels >= header.class_count))
        raise DatasetFormatError(
            f"{path}: label {labels[bad]} >= class_count at byte {_HEADER.size + bad * header.record_size}"
        )
    images = (raw[:, 1:].astype(np.float32) / 255.0).reshape(
        header.count, header.height, header.width, header.channels
    )
    return images, labels


# -- synthetic shapes -----------------------------------------------------------

@dataclass
class SyntheticShapesSpec:
    image_size: int = 64
    classes: tuple = SHAPE_CLASSES
    per_class: int = 250
    radius: tuple = (10.0, 16.0)
    position_jitter: float = 4.0
    color_jitter: float = 0.1
    noise: float = 0.02
    background_gradient: float = 0.0
    shading: float = 0.4
    seed: int = 0
    test_fraction: float = 0.2

    def __post_init__(self):
        self.classes = tuple(self.classes)
        self.radius = tuple(self.radius)
        unknown = set(self.classes) - set(SHAPE_CLASSES)
        if unknown:
            raise ValueError(f"unknown shape classes {sorted(unknown)}")
        if self.radius[0] < 6 * self.image_size / 64:
            raise ValueError("minimum shape radius must be at least 6 px at 64x64")


def _shape_mask(kind: str, yy, xx, cy, cx, r):
    dy, dx = yy - cy, xx - cx
    if kind == "disk":
        return dy * dy + dx * dx <= r * r
    if kind == "square":
        s = r * 0.85
        return (np.abs(dy) <= s) & (np.abs(dx) <= s)
    if kind == "triangle":
        # apex up at cy - r, base at cy + 0.6 r
        top, base = cy - r, cy + 0.6 * r
        half = (yy - top) / (base - top) * r
        return (yy >= top) & (yy <= base) & (np.abs(dx) <= half)
    if kind == "cross":
        t = r * 0.32
        return ((np.abs(dy) <= r) & (np.abs(dx) <= t)) | ((np.abs(dx) <= r) & (np.abs(dy) <= t))
    raise ValueError(kind)


def render_shape(kind: str, spec: SyntheticShapesSpec, rng: np.random.Generator) -> np.ndarray:
    """One image: a two-tone background with a faint grid and a top-lit coloured shape."""
    s = spec.image_size
    yy, xx = np.meshgrid(np.arange(s, dtype=float), np.arange(s, dtype=float), indexing="ij")
    t = yy / (s - 1)
    sky = np.array([0.55, 0.7, 0.9]) + rng.uniform(-0.1, 0.1, 3)
    ground = np.array([0.35, 0.3, 0.2]) + rng.uniform(-0.1, 0.1, 3)
    t = 0.5 + spec.background_gradient * (t - 0.5)
    img = (1 - t)[..., None] * sky + t[..., None] * ground
    period = s / 8
    grid = ((np.mod(yy + rng.uniform(0, period), period) < 1) | (np.mod(xx + rng.uniform(0, period), period) < 1))
    img = img - 0.12 * grid[..., None]
    r = rng.uniform(*spec.radius)
    cy = s / 2 + rng.uniform(-spec.position_jitter, spec.position_jitter)
    cx = s / 2 + rng.uniform(-spec.position_jitter, spec.position_jitter)
    base = np.array([0.85, 0.25, 0.2])
    color = np.clip(base[rng.permutation(3)] + rng.uniform(-spec.color_jitter, spec.color_jitter, 3), 0, 1)
    mask = _shape_mask(kind, yy, xx, cy, cx, r)
    # darker lower half of the shape, lit from above
    shade = 1.0 - spec.shading * np.clip((yy - (cy - r)) / (2 * r), 0, 1)
    img = np.where(mask[..., None], color * shade[..., None], img)
    img = img + rng.normal(0, spec.noise, img.shape)
    return np.clip(img, 0, 1).astype(np.float32)


def generate_shapes(spec: SyntheticShapesSpec) -> tuple[np.ndarray, np.ndarray]:
    images, labels = [], []
    for cls, kind in enumerate(spec.classes):
        for i in range(spec.per_class):
            images.append(render_shape(kind, spec, stream(spec.seed, cls, i, "shapes")))
            labels.append(cls)
    return np.stack(images), np.array(labels, dtype=np.int64)


def split_indices(labels: np.ndarray, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; each class contributes round(test_fraction * n_c) test items."""
    g = stream(seed, purpose="split")
    train, test = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[g.permutation(len(idx))]
        n_test = int(round(test_fraction * len(idx)))
        test.append(idx[:n_test])
        train.append(idx[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def gen_synthetic(spec: SyntheticShapesSpec, out_dir) -> dict:
    """Write ``train.cdld`` and ``test.cdld`` (80/20 per class) under ``out_dir``."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create output directory {out_dir}: {e.strerror}") from e
    images, labels = generate_shapes(spec)
    tr, te = split_indices(labels, spec.test_fraction, spec.seed)
    k = len(spec.classes)
    paths = {"train": out_dir / "train.cdld", "test": out_dir / "test.cdld"}
    write_dataset(paths["train"], images[tr], labels[tr], k)
    write_dataset(paths["test"], images[te], labels[te], k)
    return paths
