"""Central-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward


def finite_diff_gradcheck(
    fn: Callable[[], Tensor], params: Sequence[Tensor], eps: float = 1e-4, max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max over coordinates of |analytic - central| / (|analytic| + |central| + 1e-8).

    ``fn`` rebuilds the scalar from the current values of ``params`` and must be
    deterministic. ``max_coords`` limits probing to a random subset per tensor.
    """
    for p in params:
        p.grad = None
    loss = fn()
    backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, max_coords, replace=False)
        gflat = ga.reshape(-1)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + eps
            fp = float(fn().data)
            flat[i] = orig - eps
            fm = float(fn().data)
            flat[i] = orig
            cd = (fp - fm) / (2 * eps)
            err = abs(gflat[i] - cd) / (abs(gflat[i]) + abs(cd) + 1e-8)
            worst = max(worst, float(err))
    return worst
