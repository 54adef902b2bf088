"""Frozen-feature evaluation: adaptive pooling, linear probes and cosine retrieval."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import numerics as nx
from .numerics.optim import ConfigError


class DegenerateLabelsError(ValueError):
    """A probe needs at least two classes."""


@dataclass
class ProbeConfig:
    stage: int = -1
    pooled_dim: int = 1024
    epochs: int = 2000
    l2: float = 1e-3
    lr: float = 1.0  # multiple of 1/L, L the gradient Lipschitz bound
    tol: float = 1e-5
    seed: int = 0


@dataclass
class ProbeReport:
    stage: int
    pooled_dim: int
    train_acc: float
    test_acc: float
    epochs_run: int
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def pooled_side(h: int, c: int, pooled_dim: int) -> int:
    """Largest square side s <= h with s*s*c <= pooled_dim."""
    s = int(np.floor(np.sqrt(pooled_dim / c)))
    s = min(s, h)
    if s < 1:
        raise ConfigError(f"pooled_dim {pooled_dim} is smaller than the channel count {c}")
    return s


def adaptive_avg_pool(maps: np.ndarray, out_h: int, out_w: int | None = None) -> np.ndarray:
    """Average over bins [floor(i*H/o), ceil((i+1)*H/o)) of NHWC maps."""
    out_w = out_h if out_w is None else out_w
    n, h, w, c = maps.shape
    out = np.empty((n, out_h, out_w, c), dtype=np.float64)
    for i in range(out_h):
        y0, y1 = (i * h) // out_h, -((-(i + 1) * h) // out_h)
        for j in range(out_w):
            x0, x1 = (j * w) // out_w, -((-(j + 1) * w) // out_w)
            out[:, i, j] = maps[:, y0:y1, x0:x1].mean(axis=(1, 2))
    return out


def extract_features(encoder, images: np.ndarray, stage: int, pooled_dim: int, batch_size: int = 128) -> np.ndarray:
    """Eval-mode stage activations, adaptively pooled and flattened (no gradients)."""
    n_stages = len(encoder.stages)
    if not -n_stages <= stage < n_stages:
        raise ConfigError(f"stage {stage} out of range for a {n_stages}-stage encoder")
    was_training = encoder.training
    encoder.eval()
    rows = []
    try:
        with nx.no_grad():
            for i in range(0, len(images), batch_size):
                maps, _ = encoder(images[i : i + batch_size])
                m = maps[stage].data
                s = pooled_side(m.shape[1], m.shape[3], pooled_dim)
                pooled = m.astype(np.float64) if s == m.shape[1] else adaptive_avg_pool(m, s)
                rows.append(pooled.reshape(len(m), -1))
    finally:
        encoder.train(was_training)
    return np.concatenate(rows) if rows else np.zeros((0, 0))


def final_features(encoder, images: np.ndarray, batch_size: int = 128) -> np.ndarray:
    was_training = encoder.training
    encoder.eval()
    try:
        with nx.no_grad():
            return np.concatenate([encoder(images[i : i + batch_size])[1].data for i in range(0, len(images), batch_size)])
    finally:
        encoder.train(was_training)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class LinearProbe:
    """L2-regularised multinomial logistic regression fitted by full-batch gradient descent."""

    def __init__(self, cfg: ProbeConfig):
        self.cfg = cfg
        self.mu = self.sd = self.w = self.b = None
        self.epochs_run = 0

    def _prep(self, x):
        return (np.asarray(x, np.float64) - self.mu) / self.sd

    def fit(self, x, y) -> "LinearProbe":
        y = np.asarray(y, dtype=np.intp)
        classes = np.unique(y)
        if len(classes) < 2:
            raise DegenerateLabelsError("linear probe needs at least two distinct labels")
        x = np.asarray(x, np.float64)
        self.mu = x.mean(axis=0)
        self.sd = x.std(axis=0) + 1e-6
        x = self._prep(x)
        n, d = x.shape
        k = int(y.max()) + 1
        onehot = np.eye(k)[y]
        cfg = self.cfg
        # softmax CE Hessian is bounded by 1/2 * X'X / n (+ bias column)
        lip = 0.5 * (np.linalg.norm(x, 2) ** 2 / n + 1.0) + cfg.l2
        step = cfg.lr / lip
        w, b = np.zeros((d, k)), np.zeros(k)
        w_prev, b_prev = w, b
        epoch = 0
        for epoch in range(1, cfg.epochs + 1):
            # Nesterov look-ahead point
            mom = (epoch - 1) / (epoch + 2)
            vw, vb = w + mom * (w - w_prev), b + mom * (b - b_prev)
            err = (_softmax(x @ vw + vb) - onehot) / n
            gw = x.T @ err + cfg.l2 * vw
            gb = err.sum(axis=0)
            w_prev, b_prev = w, b
            w, b = vw - step * gw, vb - step * gb
            if np.sqrt((gw**2).sum() + (gb**2).sum()) < cfg.tol:
                break
        self.w, self.b, self.epochs_run = w, b, epoch
        return self

    def predict(self, x) -> np.ndarray:
        return np.argmax(self._prep(x) @ self.w + self.b, axis=1)

    def accuracy(self, x, y) -> float:
        return float(np.mean(self.predict(x) == np.asarray(y)))


def linear_probe(train_x, train_y, test_x, test_y, cfg: ProbeConfig) -> ProbeReport:
    """Fit on the training split and report held-out top-1 accuracy."""
    probe = LinearProbe(cfg).fit(train_x, train_y)
    return ProbeReport(cfg.stage, cfg.pooled_dim, probe.accuracy(train_x, train_y),
                       probe.accuracy(test_x, test_y), probe.epochs_run, cfg.seed)


def cosine_similarities(query: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    """Cosine similarity of ``query`` to each gallery row; 0 where either norm is 0."""
    q = np.asarray(query, np.float64)
    g = np.asarray(gallery, np.float64)
    qn = np.linalg.norm(q)
    gn = np.linalg.norm(g, axis=1)
    denom = qn * gn
    dots = g @ q
    return np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)


def knn_retrieve(query, gallery, k: int) -> list[int]:
    """Top-``k`` gallery indices by descending cosine similarity, ties by ascending index."""
    gallery = np.asarray(gallery)
    if len(gallery) == 0:
        raise ValueError("gallery is empty")
    if not 1 <= k <= len(gallery):
        raise ValueError(f"k must be in [1, {len(gallery)}], got {k}")
    sims = cosine_similarities(query, gallery)
    order = np.lexsort((np.arange(len(sims)), -sims))
    return [int(i) for i in order[:k]]


def feature_spread(features: np.ndarray, threshold: float = 1e-3) -> float:
    """Fraction of feature dimensions whose batch standard deviation exceeds ``threshold``."""
    return float(np.mean(np.asarray(features).std(axis=0) > threshold))
