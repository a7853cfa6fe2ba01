#!/usr/bin/env python3
# Adam with bias correction:
#   m_t = b1*m + (1-b1)*g ; v_t = b2*v + (1-b2)*g^2
#   theta -= lr * m_hat / (sqrt(v_hat) + eps)

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from src.errors import ShapeMismatch
from src.nn.autograd import Tensor


@dataclass
class AdamState:
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: Sequence[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                   beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return cls([np.zeros_like(p.value) for p in params], [np.zeros_like(p.value) for p in params],
                   0, lr, beta1, beta2, eps)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState) -> Sequence[Tensor]:
    if not (len(params) == len(grads) == len(state.m)):
        raise ShapeMismatch("params, grads and optimizer state disagree in length",
                            {"params": len(params), "grads": len(grads), "state": len(state.m)})
    state.t += 1
    c1 = 1.0 - state.beta1 ** state.t
    c2 = 1.0 - state.beta2 ** state.t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g.shape != p.value.shape:
            raise ShapeMismatch(f"gradient shape {g.shape} != parameter shape {p.value.shape}")
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.value = p.value - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float = 1e-3, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.state = AdamState.for_params(self.params, lr, beta1, beta2, eps)

    def step(self, grads: Sequence[np.ndarray]) -> None:
        adam_step(self.params, grads, self.state)
