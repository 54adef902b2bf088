"""Primary transformations (quarter turns, warping) and auxiliary augmentations.

Images are float32 arrays of shape (H, W, C) with values in [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .numerics import kernels
from .rng import as_generator

NUM_CLASSES = 5


class PrimaryClass(IntEnum):
    ROT0 = 0
    ROT90 = 1
    ROT180 = 2
    ROT270 = 3
    WARP = 4


@dataclass
class AuxConfig:
    crop_area: tuple[float, float] = (0.08, 1.0)
    crop_aspect: tuple[float, float] = (3 / 4, 4 / 3)
    jitter_range: tuple[float, float] = (0.5, 1.5)
    blur_sigma: tuple[float, float] = (0.1, 2.0)
    blur_kernel_frac: float = 0.1
    out_size: int = 64
    boundary_px: int = 2
    warp_grid: int = 4
    flip: bool = True
    crop: bool = True
    jitter: bool = True
    blur: bool = False

    def __post_init__(self):
        self.crop_area = tuple(self.crop_area)
        self.crop_aspect = tuple(self.crop_aspect)
        self.jitter_range = tuple(self.jitter_range)
        self.blur_sigma = tuple(self.blur_sigma)
        for name in ("crop_area", "crop_aspect", "jitter_range", "blur_sigma"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < lo <= hi, got {(lo, hi)}")
        if self.crop_area[1] > 1:
            raise ValueError("crop_area upper bound cannot exceed 1")
        if self.out_size < 1 or self.boundary_px < 0 or self.warp_grid < 2:
            raise ValueError("out_size >= 1, boundary_px >= 0 and warp_grid >= 2 required")


@dataclass
class LabeledView:
    image: np.ndarray
    label: int


def _check_image(img: np.ndarray) -> np.ndarray:
    if img.ndim != 3 or img.shape[2] not in (1, 3):
        raise ValueError(f"expected an (H, W, 1|3) image, got shape {img.shape}")
    return img


def _finish(out: np.ndarray) -> np.ndarray:
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def _uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    v = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
    assert lo <= v <= hi, (v, lo, hi)
    return v


# -- primary ----------------------------------------------------------------

def rotate90(img: np.ndarray, quarter_turns: int) -> np.ndarray:
    """Counter-clockwise rotation by ``quarter_turns`` x 90 degrees (lossless)."""
    return np.ascontiguousarray(np.rot90(img, quarter_turns % 4, axes=(0, 1)))


@dataclass
class WarpField:
    """Control-point displacements on a regular grid; anchors are (row, col) pixels."""

    grid_rows: int
    grid_cols: int
    anchors: np.ndarray
    offsets: np.ndarray
    bound: float
    shape: tuple[int, int] = field(default=(0, 0))

    def __post_init__(self):
        n = self.grid_rows * self.grid_cols
        if self.anchors.shape != (n, 2) or self.offsets.shape != (n, 2):
            raise ValueError(f"expected ({n}, 2) anchors and offsets")
        if np.any(np.abs(self.offsets) > self.bound + 1e-12):
            raise ValueError("offset magnitude exceeds the warp bound")


def warp_anchors(h: int, w: int, rows: int, cols: int) -> np.ndarray:
    ay, ax = np.meshgrid(np.linspace(0, h - 1, rows), np.linspace(0, w - 1, cols), indexing="ij")
    return np.stack([ay.ravel(), ax.ravel()], axis=1)


def warp_bound(h: int, w: int) -> float:
    return 0.1 * min(h, w)


def make_warp_field(h: int, w: int, offsets: np.ndarray, grid: int = 4) -> WarpField:
    return WarpField(grid, grid, warp_anchors(h, w, grid, grid), np.asarray(offsets, float).reshape(-1, 2),
                     warp_bound(h, w), (h, w))


def sample_warp_field(h: int, w: int, rng, grid: int = 4) -> WarpField:
    d = warp_bound(h, w)
    offsets = as_generator(rng).uniform(-d, d, size=(grid * grid, 2))
    assert np.all(np.abs(offsets) <= d)
    return make_warp_field(h, w, offsets, grid)


def dense_displacement(field_: WarpField, h: int, w: int) -> np.ndarray:
    """(H, W, 2) per-pixel displacement, bilinear in the control-point offsets."""
    grid = field_.offsets.reshape(field_.grid_rows, field_.grid_cols, 2)
    ys, xs = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    gy = ys * (field_.grid_rows - 1) / max(h - 1, 1)
    gx = xs * (field_.grid_cols - 1) / max(w - 1, 1)
    return kernels.bilinear_sample(grid, gy, gx)


def warp(img: np.ndarray, field_: WarpField) -> np.ndarray:
    """Resample so each control point's content moves by its offset."""
    _check_image(img)
    h, w = img.shape[:2]
    if field_.anchors.size and (
        field_.anchors[:, 0].min() < 0 or field_.anchors[:, 0].max() > h - 1
        or field_.anchors[:, 1].min() < 0 or field_.anchors[:, 1].max() > w - 1
    ):
        raise ValueError("warp anchors must lie inside the image")
    disp = dense_displacement(field_, h, w)
    ys, xs = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    return _finish(kernels.bilinear_sample(img, ys - disp[..., 0], xs - disp[..., 1]))


# -- auxiliary --------------------------------------------------------------

def hflip(img: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(img[:, ::-1])


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int | None = None,
                    box: tuple[float, float, float, float] | None = None) -> np.ndarray:
    """Bilinear resize of ``img`` (or of the sub-box top, left, height, width) with pixel-centre alignment."""
    out_w = out_h if out_w is None else out_w
    top, left, bh, bw = box if box is not None else (0.0, 0.0, float(img.shape[0]), float(img.shape[1]))
    ys = top + (np.arange(out_h) + 0.5) * (bh / out_h) - 0.5
    xs = left + (np.arange(out_w) + 0.5) * (bw / out_w) - 0.5
    gy, gx = np.meshgrid(ys, xs, indexing="ij")
    return _finish(kernels.bilinear_sample(img, gy, gx))


@dataclass
class CropBox:
    top: int
    left: int
    height: int
    width: int
    area_frac: float
    aspect: float
    attempts: int
    fallback: bool
    draws: list = field(default_factory=list, repr=False)  # every (area_frac, aspect) tried


def sample_crop_box(h: int, w: int, cfg: AuxConfig, rng) -> CropBox:
    rng = as_generator(rng)
    area = h * w
    log_lo, log_hi = np.log(cfg.crop_aspect[0]), np.log(cfg.crop_aspect[1])
    draws = []
    for attempt in range(1, 11):
        frac = _uniform(rng, *cfg.crop_area)
        aspect = float(np.exp(_uniform(rng, log_lo, log_hi)))
        draws.append((frac, aspect))
        cw = int(round(np.sqrt(frac * area * aspect)))
        ch = int(round(np.sqrt(frac * area / aspect)))
        if 0 < cw <= w and 0 < ch <= h:
            top = int(rng.integers(0, h - ch + 1))
            left = int(rng.integers(0, w - cw + 1))
            return CropBox(top, left, ch, cw, frac, aspect, attempt, False, draws)
    side = min(h, w)
    return CropBox((h - side) // 2, (w - side) // 2, side, side, draws[0][0], draws[0][1], 10, True, draws)


def random_crop(img: np.ndarray, cfg: AuxConfig, rng) -> np.ndarray:
    """Random-area, log-uniform-aspect crop resized to ``out_size`` square."""
    _check_image(img)
    h, w = img.shape[:2]
    if h < 8 or w < 8:
        raise ValueError(f"random_crop needs at least 8x8 input, got {h}x{w}")
    b = sample_crop_box(h, w, cfg, rng)
    return resize_bilinear(img, cfg.out_size, cfg.out_size, (b.top, b.left, b.height, b.width))


def _gray(img: np.ndarray) -> np.ndarray:
    if img.shape[2] == 1:
        return img[..., 0]
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def adjust_brightness(img, f):
    return np.clip(img * f, 0, 1)


def adjust_contrast(img, f):
    m = _gray(img).mean()
    return np.clip(m + (img - m) * f, 0, 1)


def adjust_saturation(img, f):
    g = _gray(img)[..., None]
    return np.clip(g + (img - g) * f, 0, 1)


def adjust_hue(img, f):
    """Rotate hue by (f - 1) x 180 degrees."""
    return kernels.hue_rotate(np.clip(img, 0, 1), (f - 1.0) / 2.0)


_ADJUST = {"brightness": adjust_brightness, "contrast": adjust_contrast,
           "saturation": adjust_saturation, "hue": adjust_hue}


def color_jitter(img: np.ndarray, cfg: AuxConfig, rng, factors: dict | None = None,
                 order: list[str] | None = None) -> np.ndarray:
    """Brightness/contrast/saturation/hue with uniform factors, applied in a random order.

    Single-channel images only get brightness and contrast. ``factors`` and
    ``order`` override the random draws.
    """
    _check_image(img)
    rng = as_generator(rng)
    names = ["brightness", "contrast", "saturation", "hue"] if img.shape[2] == 3 else ["brightness", "contrast"]
    drawn = {n: _uniform(rng, *cfg.jitter_range) for n in names}
    perm = [names[i] for i in rng.permutation(len(names))]
    if factors is not None:
        drawn.update(factors)
    if order is not None:
        perm = list(order)
    out = img.astype(np.float64)
    for name in perm:
        out = _ADJUST[name](out, drawn[name])
    return _finish(out)


def blur_kernel_size(h: int, w: int, frac: float = 0.1) -> int:
    k = int(round(frac * min(h, w)))
    if k % 2 == 0:
        k += 1
    return max(k, 3)


def gaussian_kernel1d(sigma: float, size: int) -> np.ndarray:
    r = np.arange(size) - size // 2
    k = np.exp(-(r**2) / (2.0 * sigma**2))
    return k / k.sum()


def blur_with_sigma(img: np.ndarray, sigma: float, size: int) -> np.ndarray:
    k = gaussian_kernel1d(sigma, size)
    r = size // 2
    out = img.astype(np.float64)
    h, w = out.shape[:2]
    p = np.pad(out, ((r, r), (0, 0), (0, 0)), mode="reflect")
    out = sum(k[i] * p[i : i + h] for i in range(size))
    p = np.pad(out, ((0, 0), (r, r), (0, 0)), mode="reflect")
    out = sum(k[i] * p[:, i : i + w] for i in range(size))
    return _finish(out)


def gaussian_blur(img: np.ndarray, cfg: AuxConfig, rng, sigma: float | None = None) -> np.ndarray:
    _check_image(img)
    if sigma is None:
        sigma = _uniform(as_generator(rng), *cfg.blur_sigma)
    return blur_with_sigma(img, sigma, blur_kernel_size(img.shape[0], img.shape[1], cfg.blur_kernel_frac))


def trim(img: np.ndarray, px: int) -> np.ndarray:
    if px <= 0 or min(img.shape[:2]) <= 2 * px:
        return img
    return img[px:-px, px:-px]


def apply_primary(img: np.ndarray, label: int, rng, grid: int = 4) -> np.ndarray:
    if label == PrimaryClass.WARP:
        h, w = img.shape[:2]
        return warp(img, sample_warp_field(h, w, rng, grid))
    return rotate90(img, label)


def make_views(img: np.ndarray, cfg: AuxConfig, rng, flip: bool | None = None) -> list[LabeledView]:
    """The five labelled views of one source image.

    One random flip of the source, then per class its own crop/jitter/blur
    chain followed by that class's primary transformation.
    """
    _check_image(img)
    rng = as_generator(rng)
    do_flip = bool(rng.random() < 0.5) if flip is None else flip
    if not cfg.flip and flip is None:
        do_flip = False
    src = trim(hflip(img) if do_flip else img, cfg.boundary_px)
    views = []
    for label in range(NUM_CLASSES):
        if cfg.crop:
            v = random_crop(src, cfg, rng)
        else:
            v = resize_bilinear(src, cfg.out_size)
        if cfg.jitter:
            v = color_jitter(v, cfg, rng)
        if cfg.blur:
            v = gaussian_blur(v, cfg, rng)
        views.append(LabeledView(apply_primary(v, label, rng, cfg.warp_grid), label))
    return views


def make_view_batch(images, cfg: AuxConfig, rngs) -> tuple[np.ndarray, np.ndarray]:
    """Stack views of several images into (B*K, S, S, C) with labels (B*K,)."""
    views = [v for img, r in zip(images, rngs) for v in make_views(img, cfg, r)]
    return np.stack([v.image for v in views]), np.array([v.label for v in views], dtype=np.intp)
