#!/usr/bin/env python3
import numpy as np
import pytest

from src.bae import (BaeConfig, BaeModel, ResidualScale, bae_decode, bae_encode, bae_train, decode_all,
                     encode_all)
from src.errors import ConfigError, ShapeMismatch
from src.nn.autograd import Tensor, no_grad
from src.nn.checkpoint import dump_checkpoint, load_checkpoint


def _pairs(rng, n=64, d=16):
    t = np.linspace(0, 1, d)
    x = np.sin(2 * np.pi * (t[None, :] + rng.uniform(size=(n, 1))))
    y = x + 0.05 * np.cos(6 * np.pi * t[None, :]) * rng.uniform(0.5, 1.5, size=(n, 1))
    return x, y


def test_hidden_dim_default():
    assert BaeConfig(block_dim=16, latent_dim=4).hidden_dim == 16


def test_latent_must_be_smaller_than_block():
    with pytest.raises(ConfigError):
        BaeConfig(block_dim=8, latent_dim=8)


def test_residual_scale_fit_and_invert(rng):
    r = rng.normal(loc=0.3, scale=0.02, size=(50, 8))
    scale = ResidualScale.fit(r)
    assert scale.mean == pytest.approx(r.mean())
    assert scale.std == pytest.approx(r.std())
    assert np.allclose(scale.invert(scale.apply(r)), r)


def test_zero_residual_keeps_unit_scale():
    scale = ResidualScale.fit(np.zeros((4, 3)))
    assert scale.std == 1.0 and scale.mean == 0.0


def test_decode_adds_back_y(rng):
    model = BaeModel(BaeConfig(block_dim=16, latent_dim=4), seed=0, scale=ResidualScale(0.1, 0.5))
    x, y = _pairs(rng, n=5)
    latent, side = bae_encode(x, y, model)
    assert latent.shape == (5, 4)
    xr = bae_decode(latent, y, side, model)
    with no_grad():
        d = model.decode(Tensor(latent)).value
    assert np.allclose(xr - y, d * 0.5 + 0.1, atol=1e-12)


def test_single_block_shapes(rng):
    model = BaeModel(BaeConfig(block_dim=16, latent_dim=4), seed=0)
    x, y = _pairs(rng, n=1)
    latent, side = bae_encode(x[0], y[0], model)
    assert latent.shape == (4,)
    assert bae_decode(latent, y[0], side, model).shape == (16,)


def test_mismatched_pair(rng):
    model = BaeModel(BaeConfig(block_dim=16, latent_dim=4), seed=0)
    with pytest.raises(ShapeMismatch):
        bae_encode(np.zeros(16), np.zeros(15), model)


def test_training_improves_on_y(rng):
    x, y = _pairs(rng, n=96)
    model, losses = bae_train(x, y, BaeConfig(block_dim=16, latent_dim=4, hidden_dim=32), epochs=40, batch=16,
                              seed=0, lr=1e-2)
    assert losses[-1] < losses[0]
    xr = decode_all(encode_all(x, y, model, workers=1), y, model, workers=1)
    assert np.mean((x - xr) ** 2) < np.mean((x - y) ** 2)


def test_checkpoint_carries_residual_scale(rng):
    x, y = _pairs(rng)
    model, _ = bae_train(x, y, BaeConfig(block_dim=16, latent_dim=4), epochs=1, seed=3)
    restored = BaeModel.from_checkpoint(load_checkpoint(
        dump_checkpoint(model, "bae", model.checkpoint_config(), model.seed)))
    assert restored.scale == model.scale
    lat = encode_all(x, y, model)
    assert np.array_equal(lat, encode_all(x, y, restored))
    assert np.array_equal(decode_all(lat, y, model), decode_all(lat, y, restored))


def test_training_after_parallel_hbae_inference(rng):
    from src import hbae
    from src.nn.autograd import grad_enabled
    model = hbae.HbaeModel(hbae.HbaeConfig(block_dim=16, hyper_k=2, embed_dim=6, latent_dim=5, hidden_dim=10))
    t = np.linspace(0, 1, 16)
    hyper = np.sin(2 * np.pi * (t[None, None, :] + rng.uniform(size=(256, 2, 1))))
    recon = hbae.decode_all(hbae.encode_all(hyper, model, workers=4), model, workers=4)
    assert grad_enabled()
    _, losses = bae_train(hyper.reshape(-1, 16), recon.reshape(-1, 16), BaeConfig(block_dim=16, latent_dim=4),
                          epochs=20, batch=64)
    assert losses[-1] < losses[0]
