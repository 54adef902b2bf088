"""Hot-loop kernels with a compiled backend and a numpy fallback.

The compiled extension is used when it imports; set ``CODIAL_PURE_PYTHON=1``
to force the fallback.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("CODIAL_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels


def im2col(xp: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    return _impl.im2col(np.ascontiguousarray(xp), kh, kw, stride)


def col2im(cols: np.ndarray, shape, kh: int, kw: int, stride: int) -> np.ndarray:
    n, hp, wp, c = shape
    return _impl.col2im(np.ascontiguousarray(cols), n, hp, wp, c, kh, kw, stride)


def bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear lookup of ``img`` (H, W, C) at float coordinates, reflect padding."""
    return _impl.bilinear_sample(
        np.ascontiguousarray(img, dtype=np.float64),
        np.ascontiguousarray(ys, dtype=np.float64),
        np.ascontiguousarray(xs, dtype=np.float64),
    )


def hue_rotate(img: np.ndarray, shift: float) -> np.ndarray:
    """Rotate the HSV hue of an RGB image by ``shift`` turns."""
    return _impl.hue_rotate(np.ascontiguousarray(img, dtype=np.float64), float(shift))
