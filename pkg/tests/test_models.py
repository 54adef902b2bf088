import math

import numpy as np
import pytest

from codial import numerics as nx
from codial.losses import cls_loss
from codial.models import (LOGVAR_MAX, CodialModel, Critic, EncoderConfig, HeadConfig, StochasticHead)
from codial.numerics import DimensionError, Tensor, finite_diff_gradcheck

TINY = EncoderConfig(stages=[(4, 3, 2), (6, 3, 2)], feature_dim=8, input_size=8)


def tiny_model(seed=0, head=None):
    return CodialModel(TINY, head or HeadConfig(repr_dim=3, critic_hidden=[5, 5]), np.random.default_rng(seed))


def test_default_encoder_shapes(rng):
    model = CodialModel(EncoderConfig(), HeadConfig(), rng)
    x = rng.random((8, 64, 64, 3)).astype(np.float32)
    maps, feat = model.encode(x)
    assert feat.shape == (8, 256)
    assert len(maps) == len(EncoderConfig().stages)
    assert [m.shape[1:] for m in maps] == model.encoder.stage_shapes()
    assert model.project_stochastic(feat).mean.shape == (8, 64)


def test_wrong_input_size(rng):
    with pytest.raises(DimensionError):
        tiny_model().encode(rng.random((2, 9, 9, 3)))


def test_identical_images_identical_features(rng):
    model = tiny_model().eval()
    img = rng.random((1, 8, 8, 3))
    _, feat = model.encode(np.repeat(img, 4, axis=0))
    assert np.array_equal(feat.data[0], feat.data[1]) and np.array_equal(feat.data[0], feat.data[3])


def test_zero_classifier_gives_ln5(rng):
    model = tiny_model()
    model.classifier.fc.weight.data[...] = 0
    model.classifier.fc.bias.data[...] = 0
    _, feat = model.encode(rng.random((4, 8, 8, 3)))
    assert float(cls_loss(model.classify(feat), [0, 1, 2, 3]).data) == pytest.approx(math.log(5), abs=1e-6)


def test_logvar_is_clamped(rng):
    head = StochasticHead(4, 2, rng)
    head.logvar.weight.data[...] = 0
    head.logvar.bias.data[...] = 50
    assert np.all(head(Tensor(np.ones((3, 4)))).logvar.data == LOGVAR_MAX)
    head.logvar.bias.data[...] = -50
    assert np.all(head(Tensor(np.ones((3, 4)))).logvar.data == -10)


def test_logvar_init_sets_bias(rng):
    model = tiny_model(head=HeadConfig(repr_dim=3, critic_hidden=[4], logvar_init=-2.0))
    assert np.all(model.head.logvar.bias.data == -2.0)


def test_critic_shape_and_mismatch(rng):
    c = Critic(3, [4, 4], rng)
    assert c(Tensor(rng.random((7, 3))), Tensor(rng.random((7, 3)))).shape == (7,)
    with pytest.raises(DimensionError):
        c(Tensor(rng.random((7, 3))), Tensor(rng.random((6, 3))))


def test_parameter_registry():
    model = tiny_model()
    names = [n for n, _ in model.named_parameters()]
    assert len(names) == len(set(names))
    # two conv stages (kernel, gamma, shift), no projection since 6 != 8 -> proj present
    assert sum(n.startswith("encoder.stages.") for n in names) == 6
    assert "encoder.proj.weight" in names
    assert sum(n.startswith("critic.") for n in names) == 6
    assert all(p.name == n for n, p in model.named_parameters())
    assert len(model.named_buffers()) == 4


def test_eval_leaves_running_stats(rng):
    model = tiny_model().eval()
    before = [b.copy() for _, b in model.named_buffers()]
    model.encode(rng.random((4, 8, 8, 3)))
    assert all(np.array_equal(a, b) for a, (_, b) in zip(before, model.named_buffers()))
    model.train()
    model.encode(rng.random((4, 8, 8, 3)))
    assert not all(np.array_equal(a, b) for a, (_, b) in zip(before, model.named_buffers()))


def test_gradcheck_encoder_classifier(f64):
    model = tiny_model()
    x = np.random.default_rng(1).random((3, 8, 8, 3))
    params = model.encoder.parameters() + model.classifier.parameters()

    def loss():
        _, f = model.encode(x)
        return cls_loss(model.classify(f), [0, 3, 4])

    assert finite_diff_gradcheck(loss, params, max_coords=20, rng=np.random.default_rng(0)) < 1e-4


def test_gradcheck_head_and_critic(f64):
    model = tiny_model()
    rng = np.random.default_rng(2)
    feats = nx.Parameter(rng.normal(size=(4, 8)))
    z2 = nx.Parameter(rng.normal(size=(4, 3)))

    def loss():
        g = model.project_stochastic(feats)
        z = nx.add(g.mean, nx.mul(nx.exp(nx.mul(g.logvar, 0.5)), Tensor(np.full((4, 3), 0.3))))
        return nx.mean(model.critic_score(z, z2))

    params = [feats, z2] + model.head.parameters() + model.critic.parameters()
    assert finite_diff_gradcheck(loss, params, max_coords=20, rng=np.random.default_rng(0)) < 1e-4
