"""Pure-numpy versions of the compiled kernels (used when the extension is absent)."""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def im2col(xp, kh, kw, stride):
    n, hp, wp, c = xp.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))  # (N, ., ., C, kh, kw)
    win = win[:, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]
    return np.ascontiguousarray(win.transpose(0, 1, 2, 4, 5, 3)).reshape(n * ho * wo, kh * kw * c)


def col2im(cols, n, hp, wp, c, kh, kw, stride):
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    cols6 = cols.reshape(n, ho, wo, kh, kw, c)
    out = np.zeros((n, hp, wp, c), dtype=cols.dtype)
    for di in range(kh):
        for dj in range(kw):
            out[:, di : di + (ho - 1) * stride + 1 : stride, dj : dj + (wo - 1) * stride + 1 : stride] += cols6[
                :, :, :, di, dj
            ]
    return out


def _reflect(x, hi):
    if hi <= 0:
        return np.zeros_like(x)
    period = 2.0 * hi
    x = np.fmod(np.abs(x), period)
    return np.where(x > hi, period - x, x)


def bilinear_sample(img, ys, xs):
    h, w, _ = img.shape
    y = _reflect(ys, h - 1)
    x = _reflect(xs, w - 1)
    y0 = np.floor(y).astype(np.intp)
    x0 = np.floor(x).astype(np.intp)
    y0 = np.minimum(y0, max(h - 2, 0))
    x0 = np.minimum(x0, max(w - 2, 0))
    y1 = y0 + 1 if h > 1 else y0
    x1 = x0 + 1 if w > 1 else x0
    fy = (y - y0)[..., None]
    fx = (x - x0)[..., None]
    return (1.0 - fy) * ((1.0 - fx) * img[y0, x0] + fx * img[y0, x1]) + fy * (
        (1.0 - fx) * img[y1, x0] + fx * img[y1, x1]
    )


def hue_rotate(img, shift):
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = mx - mn
    sat = np.divide(delta, mx, out=np.zeros_like(mx), where=mx > 0)
    safe = np.where(delta > 0, delta, 1.0)
    hr = (g - b) / safe
    hr = np.where(hr < 0, hr + 6.0, hr)
    hue = np.where(mx == r, hr, np.where(mx == g, (b - r) / safe + 2.0, (r - g) / safe + 4.0))
    hue = np.where(delta > 0, hue, 0.0)
    hue = hue / 6.0 + shift
    hue = hue - np.floor(hue)
    sector = np.floor(hue * 6.0).astype(int)
    f = hue * 6.0 - sector
    sector = sector % 6
    p = mx * (1.0 - sat)
    q = mx * (1.0 - sat * f)
    t = mx * (1.0 - sat * (1.0 - f))
    choices_r = [mx, q, p, p, t, mx]
    choices_g = [t, mx, mx, q, p, p]
    choices_b = [p, p, t, mx, mx, q]
    return np.stack([np.choose(sector, choices_r), np.choose(sector, choices_g), np.choose(sector, choices_b)], axis=-1)
