"""Time the compiled kernels against the numpy fallback on training-sized inputs.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from codial.numerics import _pykernels

try:
    from codial.numerics import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    xp = rng.random((160, 34, 34, 16)).astype(np.float32)  # a batch of 32 images x 5 views, padded
    ho = (34 - 3) // 2 + 1
    cols = rng.random((160 * ho * ho, 9 * 16)).astype(np.float32)
    img = rng.random((60, 60, 3))
    ys, xs = np.meshgrid(np.linspace(-2, 62, 64), np.linspace(-2, 62, 64), indexing="ij")
    ys, xs = np.ascontiguousarray(ys), np.ascontiguousarray(xs)
    return {
        "im2col 160x34x34x16 k3 s2": lambda m: m.im2col(xp, 3, 3, 2),
        "col2im 160x34x34x16 k3 s2": lambda m: m.col2im(cols, 160, 34, 34, 16, 3, 3, 2),
        "bilinear_sample 60x60 -> 64x64": lambda m: m.bilinear_sample(img, ys, xs),
        "hue_rotate 60x60": lambda m: m.hue_rotate(img, 0.2),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':34s} {'numpy ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in cases(rng).items():
        t_py = min(timeit.repeat(lambda: fn(_pykernels), number=1, repeat=args.repeat)) * 1e3
        if _ckernels is None:
            print(f"{name:34s} {t_py:10.2f} {'n/a':>10s}")
            continue
        t_c = min(timeit.repeat(lambda: fn(_ckernels), number=1, repeat=args.repeat)) * 1e3
        same = np.allclose(fn(_pykernels), fn(_ckernels), atol=1e-6)
        print(f"{name:34s} {t_py:10.2f} {t_c:10.2f} {t_py / t_c:7.1f}x{'' if same else '  MISMATCH'}")


if __name__ == "__main__":
    main()
