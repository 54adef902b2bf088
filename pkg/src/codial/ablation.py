"""Small-scale presets and the loss-weight / pair-count ablation driver."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .evaluation import ProbeConfig, extract_features, linear_probe
from .losses import BetaSchedule, LossWeights
from .models import EncoderConfig, HeadConfig
from .numerics import OptimizerConfig
from .training import build_model, pretrain
from .transforms import AuxConfig, resize_bilinear

log = logging.getLogger(__name__)

LAMBDA_GRID = ((1.0, 0.0), (0.0, 1.0), (1.0, 1.0))
PAIR_GRID = (1, 3, 6, 10)


def desk_config(**overrides) -> TrainConfig:
    """A 32x32 encoder that trains 30 epochs on 800 images in about two minutes on one core.

    The bottleneck ramp keeps the full-scale ratio of ramp length to training
    length, so beta tops out well below 1 within the 30 epochs.
    """
    cfg = TrainConfig(
        optimizer=OptimizerConfig(lr=2e-3),
        beta=BetaSchedule(start_epoch=3, ramp_epochs=30),
        aux=AuxConfig(out_size=32),
        encoder=EncoderConfig(stages=[(16, 3, 2), (32, 3, 2), (64, 3, 2), (64, 3, 1)], feature_dim=64, input_size=32),
        head=HeadConfig(repr_dim=32),
    )
    return replace(cfg, **overrides).validate()


def fit_to_encoder(images: np.ndarray, size: int) -> np.ndarray:
    """Resize a stack of images to the encoder's input side (no-op when it already matches)."""
    if images.shape[1] == size and images.shape[2] == size:
        return images
    return np.stack([resize_bilinear(np.asarray(im, np.float64), size) for im in images]).astype(np.float32)


@dataclass
class AblationRow:
    name: str
    lambda_cls: float
    lambda_mi: float
    pair_subset_k: int
    seed: int
    test_acc: float
    train_seconds: float = 0.0

    def to_dict(self) -> dict:
        return dict(vars(self))


def probe_encoder(encoder, train, test, probe: ProbeConfig) -> float:
    (xtr, ytr), (xte, yte) = train, test
    size = encoder.cfg.input_size
    ftr = extract_features(encoder, fit_to_encoder(xtr, size), probe.stage, probe.pooled_dim)
    fte = extract_features(encoder, fit_to_encoder(xte, size), probe.stage, probe.pooled_dim)
    return linear_probe(ftr, ytr, fte, yte, probe).test_acc


class Ablation:
    """Train-and-probe runs keyed by (lambda_cls, lambda_mi, k, seed); repeated keys are served from a cache."""

    def __init__(self, base: TrainConfig, train, test, probe: ProbeConfig | None = None, out_dir=None):
        self.base = base
        self.train, self.test = train, test
        self.probe = probe or ProbeConfig(stage=1, epochs=500)
        self.out_dir = Path(out_dir) if out_dir else None
        self._cache: dict = {}
        self.states: dict = {}

    def run(self, lam: tuple[float, float], k: int, seed: int) -> AblationRow:
        key = (float(lam[0]), float(lam[1]), int(k), int(seed))
        if key not in self._cache:
            name = f"cls{lam[0]:g}_mi{lam[1]:g}_k{k}_s{seed}"
            out = self.out_dir / name if self.out_dir else Path("runs") / name
            cfg = replace(self.base, seed=seed, pair_subset_k=k, weights=LossWeights(*lam), out_dir=str(out))
            t0 = time.perf_counter()
            state = pretrain(cfg, self.train[0], write=self.out_dir is not None)
            seconds = time.perf_counter() - t0
            acc = probe_encoder(state.model.encoder, self.train, self.test, self.probe)
            log.info("%s: probe %.4f", name, acc)
            self._cache[key] = AblationRow(name, *key[:3], seed, acc, seconds)
            self.states[key] = state
        return self._cache[key]

    def random_init(self, seed: int) -> AblationRow:
        key = ("random", seed)
        if key not in self._cache:
            enc = build_model(replace(self.base, seed=seed)).encoder
            self._cache[key] = AblationRow(f"random_s{seed}", 0.0, 0.0, 0, seed,
                                           probe_encoder(enc, self.train, self.test, self.probe))
        return self._cache[key]

    def lambda_sweep(self, seeds) -> dict[str, float]:
        out = {"random": float(np.mean([self.random_init(s).test_acc for s in seeds]))}
        for lam in LAMBDA_GRID:
            out[f"({lam[0]:g},{lam[1]:g})"] = float(np.mean([self.run(lam, self.base.pair_subset_k, s).test_acc
                                                              for s in seeds]))
        return out

    def pair_sweep(self, seeds, ks=PAIR_GRID) -> dict[int, float]:
        return {k: float(np.mean([self.run((1.0, 1.0), k, s).test_acc for s in seeds])) for k in ks}

    def rows(self) -> list[AblationRow]:
        return list(self._cache.values())


def format_table(lambda_means: dict, pair_means: dict) -> str:
    lines = ["setting            mean probe acc"]
    lines += [f"lambda {name:<12s} {acc:.4f}" for name, acc in lambda_means.items()]
    lines += [f"pairs k={k:<10d} {acc:.4f}" for k, acc in pair_means.items()]
    return "\n".join(lines)
