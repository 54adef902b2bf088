"""Objective terms: transformation classification, JS mutual-information bound,
symmetrized-KL bottleneck, beta schedule and the weighted total."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .numerics import GaussianRepr, Tensor
from .numerics.tensor import DimensionError
from .pairing import NoNegativesError


@dataclass
class LossWeights:
    lambda_cls: float = 1.0
    lambda_mi: float = 1.0

    def __post_init__(self):
        if self.lambda_cls < 0 or self.lambda_mi < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass
class BetaSchedule:
    start_value: float = 1e-6
    end_value: float = 1.0
    start_epoch: int = 10
    ramp_epochs: int = 100

    def __post_init__(self):
        if not 0 < self.start_value <= self.end_value:
            raise ValueError("need 0 < start_value <= end_value")
        if self.ramp_epochs < 1 or self.start_epoch < 0:
            raise ValueError("ramp_epochs >= 1 and start_epoch >= 0 required")


def beta_at(schedule: BetaSchedule, epoch: int) -> float:
    """Bottleneck weight at ``epoch``: flat, then a geometric ramp, then flat."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    if epoch <= schedule.start_epoch:
        return schedule.start_value
    if epoch >= schedule.start_epoch + schedule.ramp_epochs:
        return schedule.end_value
    t = (epoch - schedule.start_epoch) / schedule.ramp_epochs
    return schedule.start_value * (schedule.end_value / schedule.start_value) ** t


def cls_loss(logits: Tensor, labels) -> Tensor:
    """Cross-entropy averaged over every view of every image."""
    return nx.softmax_cross_entropy(logits, labels)


def js_bound_from_scores(pos: Tensor, neg: Tensor) -> Tensor:
    """E_pos[-softplus(-C)] - E_neg[softplus(C)]."""
    if neg.data.size == 0:
        raise NoNegativesError("the JS bound needs at least one negative pair")
    if pos.data.size == 0:
        raise ValueError("the JS bound needs at least one positive pair")
    return nx.sub(nx.neg(nx.mean(nx.softplus(nx.neg(pos)))), nx.mean(nx.softplus(neg)))


def js_mi_lower_bound(critic, pos_samples, neg_samples) -> Tensor:
    """JS mutual-information objective for (z1, z2) positive and (z1, z2') negative pairs.

    Each argument is a pair of (P, D) tensors. Its value is 2 JSD - 2 ln 2, not
    nats; see :func:`mi_nats_from_scores` for an MI readout.
    """
    pos = critic(*pos_samples)
    neg = critic(*neg_samples)
    return js_bound_from_scores(pos, neg)


def mi_nats_from_scores(pos, neg) -> float:
    """E_pos[C] - E_neg[exp C] + 1: a lower bound on MI in nats, tight when the critic
    equals the log density ratio, which is what the JS objective converges to."""
    pos = np.asarray(getattr(pos, "data", pos), dtype=np.float64)
    neg = np.asarray(getattr(neg, "data", neg), dtype=np.float64)
    return float(pos.mean() - np.exp(neg).mean() + 1.0)


def gaussian_kl(p: GaussianRepr, q: GaussianRepr) -> Tensor:
    """Per-row KL(p || q) between diagonal Gaussians, summed over dimensions."""
    if p.mean.shape != q.mean.shape:
        raise DimensionError(f"representation shapes differ: {p.mean.shape} vs {q.mean.shape}")
    diff = nx.sub(p.mean, q.mean)
    var_p = nx.exp(p.logvar)
    inv_var_q = nx.exp(nx.neg(q.logvar))
    per = nx.add(
        nx.mul(nx.sub(q.logvar, p.logvar), 0.5),
        nx.mul(nx.mul(nx.add(var_p, nx.mul(diff, diff)), inv_var_q), 0.5),
    )
    return nx.sub(nx.sum(per, axis=-1), 0.5 * p.dim)


def mib_regularizer(p: GaussianRepr, q: GaussianRepr) -> Tensor:
    """Batch mean of 1/2 KL(p||q) + 1/2 KL(q||p)."""
    sym = nx.mul(nx.add(gaussian_kl(p, q), gaussian_kl(q, p)), 0.5)
    return nx.mean(sym)


def mi_loss(mi_estimate, reg, beta: float):
    return nx.add(nx.neg(mi_estimate), nx.mul(reg, beta)) if isinstance(mi_estimate, Tensor) else -mi_estimate + beta * reg


def total_loss(cls, mi, w: LossWeights):
    if isinstance(cls, Tensor) or isinstance(mi, Tensor):
        terms = []
        if w.lambda_cls:
            terms.append(nx.mul(cls, w.lambda_cls))
        if w.lambda_mi and mi is not None:
            terms.append(nx.mul(mi, w.lambda_mi))
        if not terms:
            return nx.mul(cls, 0.0)
        out = terms[0]
        for t in terms[1:]:
            out = nx.add(out, t)
        return out
    return w.lambda_cls * cls + w.lambda_mi * mi


def gaussian_mi(rho: float) -> float:
    """MI in nats of a bivariate normal with correlation ``rho``."""
    return 0.5 * math.log(1.0 / (1.0 - rho * rho))
