# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for im2col/col2im and bilinear resampling.

Semantics match :mod:`codial.numerics._pykernels` exactly; the two are
cross-checked in the test-suite.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs, fmod

ctypedef fused real:
    float
    double


def im2col(real[:, :, :, ::1] xp, int kh, int kw, int stride):
    """(N, Hp, Wp, C) padded input -> (N*Ho*Wo, kh*kw*C) patch matrix."""
    cdef Py_ssize_t n = xp.shape[0], hp = xp.shape[1], wp = xp.shape[2], c = xp.shape[3]
    cdef Py_ssize_t ho = (hp - kh) // stride + 1
    cdef Py_ssize_t wo = (wp - kw) // stride + 1
    dtype = np.float32 if real is float else np.float64
    out_arr = np.empty((n * ho * wo, kh * kw * c), dtype=dtype)
    cdef real[:, ::1] out = out_arr
    cdef Py_ssize_t b, i, j, di, dj, ch, row, col
    with nogil:
        row = 0
        for b in range(n):
            for i in range(ho):
                for j in range(wo):
                    col = 0
                    for di in range(kh):
                        for dj in range(kw):
                            for ch in range(c):
                                out[row, col] = xp[b, i * stride + di, j * stride + dj, ch]
                                col += 1
                    row += 1
    return out_arr


def col2im(real[:, ::1] cols, Py_ssize_t n, Py_ssize_t hp, Py_ssize_t wp, Py_ssize_t c,
           int kh, int kw, int stride):
    """Adjoint of :func:`im2col`: scatter-add patch rows back into (N, Hp, Wp, C)."""
    cdef Py_ssize_t ho = (hp - kh) // stride + 1
    cdef Py_ssize_t wo = (wp - kw) // stride + 1
    dtype = np.float32 if real is float else np.float64
    out_arr = np.zeros((n, hp, wp, c), dtype=dtype)
    cdef real[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, i, j, di, dj, ch, row, col
    with nogil:
        # same accumulation order as the numpy fallback: kernel offset outermost
        for di in range(kh):
            for dj in range(kw):
                for b in range(n):
                    for i in range(ho):
                        for j in range(wo):
                            row = (b * ho + i) * wo + j
                            col = (di * kw + dj) * c
                            for ch in range(c):
                                out[b, i * stride + di, j * stride + dj, ch] += cols[row, col + ch]
    return out_arr


cdef inline double _reflect(double x, double hi) nogil:
    # continuous mirror about 0 and hi, period 2*hi
    cdef double period
    if hi <= 0:
        return 0.0
    period = 2.0 * hi
    x = fmod(fabs(x), period)
    if x > hi:
        x = period - x
    return x


def bilinear_sample(double[:, :, ::1] img, double[:, ::1] ys, double[:, ::1] xs):
    """Sample ``img`` (H, W, C) at fractional coordinates with reflect padding."""
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1], c = img.shape[2]
    cdef Py_ssize_t oh = ys.shape[0], ow = ys.shape[1]
    out_arr = np.empty((oh, ow, c), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, ch, y0, x0, y1, x1
    cdef double y, x, fy, fx
    with nogil:
        for i in range(oh):
            for j in range(ow):
                y = _reflect(ys[i, j], h - 1)
                x = _reflect(xs[i, j], w - 1)
                y0 = <Py_ssize_t>floor(y)
                x0 = <Py_ssize_t>floor(x)
                if y0 > h - 2:
                    y0 = h - 2 if h > 1 else 0
                if x0 > w - 2:
                    x0 = w - 2 if w > 1 else 0
                y1 = y0 + 1 if h > 1 else 0
                x1 = x0 + 1 if w > 1 else 0
                fy = y - y0
                fx = x - x0
                for ch in range(c):
                    out[i, j, ch] = ((1.0 - fy) * ((1.0 - fx) * img[y0, x0, ch] + fx * img[y0, x1, ch])
                                     + fy * ((1.0 - fx) * img[y1, x0, ch] + fx * img[y1, x1, ch]))
    return out_arr


def hue_rotate(double[:, :, ::1] img, double shift):
    """RGB -> HSV, add ``shift`` (in turns) to hue, HSV -> RGB."""
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    out_arr = np.empty((h, w, 3), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef int sector
    cdef double r, g, b, mx, mn, delta, hue, sat, val, f, p, q, t
    with nogil:
        for i in range(h):
            for j in range(w):
                r = img[i, j, 0]
                g = img[i, j, 1]
                b = img[i, j, 2]
                mx = r if r > g else g
                mx = mx if mx > b else b
                mn = r if r < g else g
                mn = mn if mn < b else b
                val = mx
                delta = mx - mn
                sat = delta / mx if mx > 0 else 0.0
                if delta <= 0:
                    hue = 0.0
                elif mx == r:
                    hue = (g - b) / delta
                    if hue < 0:
                        hue = hue + 6.0
                elif mx == g:
                    hue = (b - r) / delta + 2.0
                else:
                    hue = (r - g) / delta + 4.0
                hue = hue / 6.0 + shift
                hue = hue - floor(hue)
                sector = <int>floor(hue * 6.0)
                f = hue * 6.0 - sector
                sector = sector % 6
                p = val * (1.0 - sat)
                q = val * (1.0 - sat * f)
                t = val * (1.0 - sat * (1.0 - f))
                if sector == 0:
                    out[i, j, 0] = val; out[i, j, 1] = t; out[i, j, 2] = p
                elif sector == 1:
                    out[i, j, 0] = q; out[i, j, 1] = val; out[i, j, 2] = p
                elif sector == 2:
                    out[i, j, 0] = p; out[i, j, 1] = val; out[i, j, 2] = t
                elif sector == 3:
                    out[i, j, 0] = p; out[i, j, 1] = q; out[i, j, 2] = val
                elif sector == 4:
                    out[i, j, 0] = t; out[i, j, 1] = p; out[i, j, 2] = val
                else:
                    out[i, j, 0] = val; out[i, j, 1] = p; out[i, j, 2] = q
    return out_arr
