#!/usr/bin/env python3
import numpy as np
import pytest

from src.errors import ShapeMismatch, TruncatedFile, VersionMismatch
from src.nn import autograd as ag
from src.nn.autograd import Tensor, backward, grad_enabled, no_grad
from src.nn.checkpoint import digest, dump_checkpoint, load_checkpoint
from src.nn.gradcheck import max_relative_error
from src.nn.layers import (EmbeddingNet, LayerNorm, Linear, SelfAttention, attention_forward, layernorm_forward,
                           linear_forward, mse_loss)
from src.nn.optim import Adam, AdamState, adam_step
from src.parallel import map_chunks


def _param(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


# ---------- gradient checks ----------
def _linear_case(rng):
    layer = Linear(5, 4, rng)
    x, target = Tensor(rng.normal(size=(3, 5))), Tensor(rng.normal(size=(3, 4)))
    return lambda: mse_loss(ag.relu(linear_forward(x, layer)), target), layer.parameters(), 1e-6


def _layernorm_case(rng):
    x, gamma, beta = _param(rng, 4, 6), _param(rng, 6), _param(rng, 6)
    target = Tensor(rng.normal(size=(4, 6)))
    return lambda: mse_loss(layernorm_forward(x, gamma, beta), target), [x, gamma, beta], 1e-5


def _attention_case(rng):
    attn = SelfAttention(6, 3, 6, rng)
    x = _param(rng, 2, 4, 6)
    target = Tensor(rng.normal(size=(2, 4, 6)))
    return lambda: mse_loss(attention_forward(x, attn), target), attn.parameters() + [x], 1e-5


def _residual_block_case(rng):
    embed = EmbeddingNet(5, 7, 4, rng)
    norm = LayerNorm(4)
    attn = SelfAttention(4, 4, 4, rng)
    x = Tensor(rng.normal(size=(3, 2, 5)))
    target = Tensor(rng.normal(size=(3, 2, 4)))

    def loss():
        e = embed(x)
        return mse_loss(ag.add(attn(norm(e)), e), target)

    return loss, embed.parameters() + norm.parameters() + attn.parameters(), 1e-6


CASES = {"linear_relu": _linear_case, "layernorm": _layernorm_case, "attention": _attention_case,
         "residual_block": _residual_block_case}


@pytest.mark.parametrize("case", sorted(CASES))
@pytest.mark.parametrize("seed", range(3))
def test_gradients_match_finite_differences(case, seed):
    loss, params, h = CASES[case](np.random.default_rng(seed))
    assert max_relative_error(loss, params, h=h) < 1e-4


@pytest.mark.slow
@pytest.mark.parametrize("case", sorted(CASES))
def test_gradients_hundred_seeds(case):
    for seed in range(100):
        loss, params, h = CASES[case](np.random.default_rng(10_000 + seed))
        assert max_relative_error(loss, params, h=h) < 1e-4, seed


def test_softmax_rows_sum_to_one(rng):
    s = ag.softmax(Tensor(rng.normal(size=(3, 5)) * 50))
    assert np.allclose(s.value.sum(axis=-1), 1.0)


def test_backward_returns_zeros_for_unused_parameter(rng):
    a, unused = _param(rng, 3), _param(rng, 2)
    grads = backward(mse_loss(a, Tensor(np.zeros(3))), [a, unused])
    assert np.allclose(grads[0], 2.0 * a.value / 3)
    assert not grads[1].any()


def test_backward_needs_scalar(rng):
    with pytest.raises(ShapeMismatch):
        backward(_param(rng, 3))


def test_no_grad_records_nothing(rng):
    a = _param(rng, 2, 2)
    with no_grad():
        out = ag.matmul(a, a)
    assert out._parents == ()


def test_no_grad_in_worker_threads_leaves_caller_recording(rng):
    seen = []

    def infer(chunk):
        with no_grad():
            seen.append(grad_enabled())
            return ag.relu(Tensor(chunk)).value

    data = rng.normal(size=(2000, 3))
    for _ in range(20):
        map_chunks(infer, data, workers=4)
        assert grad_enabled()
    assert seen and not any(seen)

    a = _param(rng, 2)
    grads = backward(mse_loss(a, Tensor(np.zeros(2))), [a])
    assert np.allclose(grads[0], a.value)


def test_linear_rejects_wrong_width(rng):
    with pytest.raises(ShapeMismatch):
        Linear(3, 2, rng)(Tensor(np.ones((1, 4))))


# ---------- optimizer ----------
def test_adam_first_step_moves_by_lr():
    p = Tensor(np.array([1.0, -2.0]), requires_grad=True)
    state = AdamState.for_params([p], lr=0.1)
    adam_step([p], [np.array([0.5, -3.0])], state)
    # bias-corrected first step is lr * sign(g)
    assert np.allclose(p.value, [0.9, -1.9], atol=1e-6)
    assert state.t == 1


def test_adam_minimizes_quadratic():
    p = Tensor(np.array([3.0, -4.0]), requires_grad=True)
    opt = Adam([p], lr=0.1)
    for _ in range(500):
        opt.step(backward(mse_loss(p, Tensor(np.zeros(2))), [p]))
    assert np.abs(p.value).max() < 0.1


def test_adam_length_mismatch():
    p = Tensor(np.zeros(2), requires_grad=True)
    with pytest.raises(ShapeMismatch):
        adam_step([p], [], AdamState.for_params([p]))


# ---------- checkpoints ----------
def test_checkpoint_round_trip(rng):
    net = EmbeddingNet(6, 5, 3, rng)
    net.round_to_float32()
    payload = dump_checkpoint(net, "embed", {"d_in": 6}, seed=7)
    ckpt = load_checkpoint(payload)
    assert ckpt.kind == "embed" and ckpt.seed == 7 and ckpt.config == {"d_in": 6}
    other = EmbeddingNet(6, 5, 3, np.random.default_rng(99))
    other.load_state_dict(ckpt.state)
    for (n1, p1), (n2, p2) in zip(net.named_parameters(), other.named_parameters()):
        assert n1 == n2
        assert np.array_equal(p1.value, p2.value)
    assert digest(payload) == digest(dump_checkpoint(other, "embed", {"d_in": 6}, seed=7))


def test_checkpoint_parameter_order_is_attribute_order(rng):
    names = [n for n, _ in EmbeddingNet(2, 3, 2, rng).named_parameters()]
    assert names == ["fc1.weight", "fc1.bias", "fc2.weight", "fc2.bias"]


def test_checkpoint_rejects_bad_magic(rng):
    payload = dump_checkpoint(Linear(2, 2, rng), "linear", {}, seed=0)
    with pytest.raises(VersionMismatch):
        load_checkpoint(b"XXXX" + payload[4:])


def test_checkpoint_truncated(rng):
    payload = dump_checkpoint(Linear(2, 2, rng), "linear", {}, seed=0)
    with pytest.raises(TruncatedFile):
        load_checkpoint(payload[:-3])


def test_load_state_dict_shape_check(rng):
    net = Linear(2, 3, rng)
    with pytest.raises(ShapeMismatch):
        net.load_state_dict({"weight": np.zeros((3, 2)), "bias": np.zeros(3)})
