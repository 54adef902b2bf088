"""Correlated-Gaussian benchmark for the JS mutual-information estimator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .losses import gaussian_mi, js_bound_from_scores, mi_nats_from_scores
from .models import Critic
from .numerics import Optimizer, OptimizerConfig, Tensor
from .rng import stream


def correlated_gaussians(n: int, rho: float, rng, dim: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """``dim`` independent coordinate pairs (x_i, y_i), each standard bivariate normal with correlation ``rho``."""
    x = rng.standard_normal((n, dim))
    y = rho * x + np.sqrt(1.0 - rho * rho) * rng.standard_normal((n, dim))
    return x, y


@dataclass
class OracleResult:
    rho: float
    true_mi: float
    estimate: float
    js_bound: float
    seed: int


def train_js_estimator(rho: float, seed: int = 0, steps: int = 1500, batch: int = 256,
                       hidden: tuple[int, ...] = (64, 64), lr: float = 3e-3, eval_n: int = 20_000) -> OracleResult:
    """Fit a critic with the JS objective, then read MI off a fresh sample.

    Negatives pair each x with the y of another row (a cyclic shift of a shuffled batch).
    """
    with nx.precision("float64"):
        critic = Critic(1, list(hidden), stream(seed, purpose="oracle-init"))
        for name, p in critic.named_parameters():
            p.name = name
        opt = Optimizer(critic.parameters(), OptimizerConfig(method="adam", lr=lr))
        g = stream(seed, purpose="oracle-data")
        for _ in range(steps):
            x, y = correlated_gaussians(batch, rho, g)
            y_neg = np.roll(y, 1, axis=0)
            opt.zero_grad()
            pos = critic(Tensor(x), Tensor(y))
            neg = critic(Tensor(x), Tensor(y_neg))
            loss = nx.neg(js_bound_from_scores(pos, neg))
            nx.backward(loss)
            opt.step()
        x, y = correlated_gaussians(eval_n, rho, stream(seed, purpose="oracle-eval"))
        with nx.no_grad():
            pos = critic(Tensor(x), Tensor(y))
            neg = critic(Tensor(x), Tensor(np.roll(y, 1, axis=0)))
            js = float(js_bound_from_scores(pos, neg).data)
        return OracleResult(rho, gaussian_mi(rho), mi_nats_from_scores(pos, neg), js, seed)
