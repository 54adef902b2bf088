"""Shared encoder trunk, transformation classifier, stochastic head and critic."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import numerics as nx
from .numerics import GaussianRepr, Parameter, RunningStats, Tensor
from .numerics.tensor import DimensionError, default_dtype

LOGVAR_MIN, LOGVAR_MAX = -10.0, 10.0


@dataclass
class EncoderConfig:
    stages: list = field(default_factory=lambda: [(32, 3, 2), (64, 3, 2), (128, 3, 2), (256, 3, 2)])
    feature_dim: int = 256
    input_size: int = 64
    in_channels: int = 3

    def __post_init__(self):
        self.stages = [tuple(int(v) for v in s) for s in self.stages]
        if not self.stages:
            raise ValueError("encoder needs at least one conv stage")


@dataclass
class HeadConfig:
    repr_dim: int = 64
    critic_hidden: list = field(default_factory=lambda: [256, 256])
    # initial log-variance: unit noise would swamp the freshly initialised means
    logvar_init: float = -6.0


class Module:
    """Minimal parameter registry; submodules and parameters are discovered in attribute order."""

    training = True

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Parameter]]:
        out = []
        for name, val in vars(self).items():
            if isinstance(val, Parameter):
                out.append((prefix + name, val))
            elif isinstance(val, Module):
                out.extend(val.named_parameters(prefix + name + "."))
            elif isinstance(val, list) and val and isinstance(val[0], Module):
                for i, m in enumerate(val):
                    out.extend(m.named_parameters(f"{prefix}{name}.{i}."))
        return out

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> list[tuple[str, np.ndarray]]:
        out = []
        for name, val in vars(self).items():
            if isinstance(val, RunningStats):
                out += [(f"{prefix}{name}.mean", val.mean), (f"{prefix}{name}.var", val.var)]
            elif isinstance(val, Module):
                out.extend(val.named_buffers(prefix + name + "."))
            elif isinstance(val, list) and val and isinstance(val[0], Module):
                for i, m in enumerate(val):
                    out.extend(m.named_buffers(f"{prefix}{name}.{i}."))
        return out

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for val in vars(self).values():
            if isinstance(val, Module):
                val.train(mode)
            elif isinstance(val, list):
                for m in val:
                    if isinstance(m, Module):
                        m.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def _name(self, p: Parameter, name: str) -> Parameter:
        p.name = name
        return p


def _he(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(default_dtype())


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, gain: float = 2.0):
        self.weight = Parameter(rng.standard_normal((d_in, d_out)) * np.sqrt(gain / d_in), "weight")
        self.bias = Parameter(np.zeros(d_out), "bias")

    def __call__(self, x: Tensor) -> Tensor:
        return nx.dense(x, self.weight, self.bias)


class ConvStage(Module):
    """conv (no bias) -> batch norm -> relu."""

    def __init__(self, c_in: int, c_out: int, kernel: int, stride: int, rng: np.random.Generator):
        self.stride = stride
        self.pad = kernel // 2
        self.kernel = Parameter(_he(rng, (kernel, kernel, c_in, c_out), kernel * kernel * c_in), "kernel")
        self.gamma = Parameter(np.ones(c_out), "gamma")
        self.shift = Parameter(np.zeros(c_out), "shift")
        self.stats = RunningStats.fresh(c_out, default_dtype())

    def __call__(self, x: Tensor) -> Tensor:
        y = nx.conv2d(x, self.kernel, self.stride, self.pad)
        return nx.relu(nx.batch_norm(y, self.gamma, self.shift, self.stats, training=self.training))


class Encoder(Module):
    def __init__(self, cfg: EncoderConfig, rng: np.random.Generator):
        self.cfg = cfg
        c = cfg.in_channels
        self.stages = []
        for out_c, k, s in cfg.stages:
            self.stages.append(ConvStage(c, out_c, k, s, rng))
            c = out_c
        self.proj = Linear(c, cfg.feature_dim, rng) if cfg.feature_dim != c else None

    def stage_shapes(self) -> list[tuple[int, int, int]]:
        h = self.cfg.input_size
        shapes = []
        for out_c, k, s in self.cfg.stages:
            h = (h + 2 * (k // 2) - k) // s + 1
            shapes.append((h, h, out_c))
        return shapes

    def __call__(self, images) -> tuple[list[Tensor], Tensor]:
        x = images if isinstance(images, Tensor) else Tensor(np.asarray(images, dtype=default_dtype()))
        size, ch = self.cfg.input_size, self.cfg.in_channels
        if x.ndim != 4 or x.shape[1:] != (size, size, ch):
            raise DimensionError(f"encoder expects (N, {size}, {size}, {ch}) images, got {x.shape}")
        maps = []
        for stage in self.stages:
            x = stage(x)
            maps.append(x)
        feat = nx.mean(x, axis=(1, 2))
        if self.proj is not None:
            feat = self.proj(feat)
        return maps, feat


class Classifier(Module):
    def __init__(self, feature_dim: int, num_classes: int, rng: np.random.Generator):
        self.fc = Linear(feature_dim, num_classes, rng, gain=1.0)

    def __call__(self, features: Tensor) -> Tensor:
        return self.fc(features)


class StochasticHead(Module):
    """Two linear maps to the mean and (clamped) log-variance of a diagonal Gaussian."""

    def __init__(self, feature_dim: int, repr_dim: int, rng: np.random.Generator, logvar_init: float = 0.0):
        self.mean = Linear(feature_dim, repr_dim, rng, gain=1.0)
        self.logvar = Linear(feature_dim, repr_dim, rng, gain=1.0)
        self.logvar.bias.data[...] = logvar_init

    def __call__(self, features: Tensor) -> GaussianRepr:
        return GaussianRepr(self.mean(features), nx.clip(self.logvar(features), LOGVAR_MIN, LOGVAR_MAX))


class Critic(Module):
    """Scalar score of a pair: relu MLP on the concatenation [z1, z2]."""

    def __init__(self, repr_dim: int, hidden: list[int], rng: np.random.Generator):
        dims = [2 * repr_dim, *hidden]
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]
        self.out = Linear(dims[-1], 1, rng, gain=1.0)

    def __call__(self, z1: Tensor, z2: Tensor) -> Tensor:
        if z1.shape != z2.shape:
            raise DimensionError(f"critic inputs differ: {z1.shape} vs {z2.shape}")
        h = nx.concat([z1, z2], axis=-1)
        for layer in self.layers:
            h = nx.relu(layer(h))
        return nx.reshape(self.out(h), (-1,))


class CodialModel(Module):
    """One encoder trunk shared by the classifier and the stochastic head; plus the critic."""

    def __init__(self, enc: EncoderConfig, head: HeadConfig, rng: np.random.Generator, num_classes: int = 5):
        self.encoder = Encoder(enc, rng)
        self.classifier = Classifier(enc.feature_dim, num_classes, rng)
        self.head = StochasticHead(enc.feature_dim, head.repr_dim, rng, head.logvar_init)
        self.critic = Critic(head.repr_dim, head.critic_hidden, rng)
        for name, p in self.named_parameters():
            p.name = name

    def encode(self, images):
        return self.encoder(images)

    def classify(self, features: Tensor) -> Tensor:
        return self.classifier(features)

    def project_stochastic(self, features: Tensor) -> GaussianRepr:
        return self.head(features)

    def critic_score(self, z1: Tensor, z2: Tensor) -> Tensor:
        return self.critic(z1, z2)
