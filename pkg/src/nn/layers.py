#!/usr/bin/env python3
"""
Layers built on the autodiff core: Linear, LayerNorm, single-head
self-attention and the two-layer ReLU embedding network.
"""

from typing import Dict, List, Tuple

import numpy as np

from src.errors import ShapeMismatch
from src.nn import autograd as ag
from src.nn.autograd import Tensor


class Module:
    """Parameters and sub-modules are discovered from attributes in assignment order"""

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Tensor]]:
        out: List[Tuple[str, Tensor]] = []
        for name, attr in vars(self).items():
            if isinstance(attr, Tensor) and attr.requires_grad:
                out.append((prefix + name, attr))
            elif isinstance(attr, Module):
                out.extend(attr.named_parameters(prefix + name + "."))
        return out

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.value.size for p in self.parameters())

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        for name, p in self.named_parameters():
            if name not in state:
                raise ShapeMismatch(f"missing parameter {name}", {"name": name})
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.value.shape:
                raise ShapeMismatch(f"{name}: expected {p.value.shape}, got {value.shape}", {"name": name})
            p.value = value.copy()

    def round_to_float32(self) -> None:
        """Snap weights to the values a 32-bit checkpoint would restore"""
        for p in self.parameters():
            p.value = p.value.astype(np.float32).astype(np.float64)

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError


def glorot_uniform(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, size=(d_in, d_out))


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator):
        self.weight = Tensor(glorot_uniform(rng, d_in, d_out), requires_grad=True, name="weight")
        self.bias = Tensor(np.zeros(d_out), requires_grad=True, name="bias")

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]

    def forward(self, x: Tensor) -> Tensor:
        return linear_forward(x, self)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(dim), requires_grad=True, name="gamma")
        self.beta = Tensor(np.zeros(dim), requires_grad=True, name="beta")
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return layernorm_forward(x, self.gamma, self.beta, self.eps)


class SelfAttention(Module):
    """Single-head scaled dot-product attention; d*(2*d_k + d_v) parameters, no biases"""

    def __init__(self, d: int, d_k: int, d_v: int, rng: np.random.Generator):
        self.w_q = Tensor(glorot_uniform(rng, d, d_k), requires_grad=True, name="w_q")
        self.w_k = Tensor(glorot_uniform(rng, d, d_k), requires_grad=True, name="w_k")
        self.w_v = Tensor(glorot_uniform(rng, d, d_v), requires_grad=True, name="w_v")

    @property
    def d_k(self) -> int:
        return self.w_q.shape[1]

    def forward(self, x: Tensor) -> Tensor:
        return attention_forward(x, self)


class EmbeddingNet(Module):
    """linear -> ReLU -> linear"""

    def __init__(self, d_in: int, hidden: int, d_out: int, rng: np.random.Generator):
        self.fc1 = Linear(d_in, hidden, rng)
        self.fc2 = Linear(hidden, d_out, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(ag.relu(self.fc1(x)))


# ---------- functional forms ----------
def linear_forward(x: Tensor, layer: Linear) -> Tensor:
    if x.shape[-1] != layer.d_in:
        raise ShapeMismatch(f"linear expects last dim {layer.d_in}, got {x.shape[-1]}",
                            {"expected": layer.d_in, "got": x.shape[-1]})
    return ag.add(ag.matmul(x, layer.weight), layer.bias)


def layernorm_forward(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    if gamma.shape[-1] != x.shape[-1] or beta.shape[-1] != x.shape[-1]:
        raise ShapeMismatch("layer norm affine length must match the row length",
                            {"cols": x.shape[-1], "gamma": gamma.shape[-1], "beta": beta.shape[-1]})
    return ag.layer_norm(x, gamma, beta, eps)


def attention_forward(x: Tensor, p: SelfAttention) -> Tensor:
    """softmax(X W_Q (X W_K)^T / sqrt(d_k)) X W_V"""
    q = ag.matmul(x, p.w_q)
    k = ag.matmul(x, p.w_k)
    v = ag.matmul(x, p.w_v)
    scores = ag.scale(ag.matmul(q, ag.transpose(k)), 1.0 / np.sqrt(p.d_k))
    return ag.matmul(ag.softmax(scores), v)


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    return ag.mse(pred, target)

