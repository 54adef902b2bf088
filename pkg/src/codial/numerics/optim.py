"""In-place parameter updates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Parameter


class ConfigError(ValueError):
    """Invalid hyper-parameters."""


@dataclass
class OptimizerConfig:
    method: str = "adam"
    lr: float = 3e-4
    weight_decay: float = 0.0
    momentum: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def validate(self) -> None:
        if self.method not in ("sgd_momentum", "adam"):
            raise ConfigError(f"unknown optimizer method {self.method!r}")
        if not self.lr > 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight decay must be nonnegative, got {self.weight_decay}")


class Optimizer:
    """SGD with momentum or Adam over a fixed, ordered parameter list.

    State buffers are keyed by parameter name so they can be checkpointed.
    """

    def __init__(self, params: list[Parameter], cfg: OptimizerConfig):
        cfg.validate()
        self.params = list(params)
        self.cfg = cfg
        self.t = 0
        self.state: dict[str, np.ndarray] = {}
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ConfigError("parameter names must be unique")

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        cfg = self.cfg
        self.t += 1
        for p in self.params:
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            if cfg.weight_decay:
                g = g + cfg.weight_decay * p.data
            if cfg.method == "sgd_momentum":
                if cfg.momentum:
                    buf = self.state.get(p.name + ":mom")
                    buf = g.copy() if buf is None else cfg.momentum * buf + g
                    self.state[p.name + ":mom"] = buf
                    g = buf
                p.data -= (cfg.lr * g).astype(p.dtype)
            else:
                m = self.state.get(p.name + ":m", np.zeros_like(p.data))
                v = self.state.get(p.name + ":v", np.zeros_like(p.data))
                m = cfg.beta1 * m + (1 - cfg.beta1) * g
                v = cfg.beta2 * v + (1 - cfg.beta2) * g * g
                self.state[p.name + ":m"] = m.astype(p.dtype)
                self.state[p.name + ":v"] = v.astype(p.dtype)
                mhat = m / (1 - cfg.beta1**self.t)
                vhat = v / (1 - cfg.beta2**self.t)
                p.data -= (cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps)).astype(p.dtype)


def optimizer_step(params: list[Parameter], optimizer: Optimizer) -> None:
    """Apply one update from the gradients currently stored on ``params``."""
    if [p.name for p in params] != [p.name for p in optimizer.params]:
        raise ConfigError("parameter list differs from the optimizer's")
    optimizer.step()
