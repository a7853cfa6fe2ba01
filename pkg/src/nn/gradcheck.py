#!/usr/bin/env python3
"""Central finite-difference check of analytic gradients"""

from typing import Callable, Dict, Sequence

import numpy as np

from src.nn.autograd import Tensor, backward


def numeric_gradient(loss_fn: Callable[[], Tensor], param: Tensor, h: float = 1e-5) -> np.ndarray:
    param.value = np.ascontiguousarray(param.value)
    grad = np.zeros_like(param.value)
    flat = param.value.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn().item()
        flat[i] = orig - h
        down = loss_fn().item()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def gradient_errors(loss_fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> Dict[int, float]:
    """
    Relative error per parameter tensor: max|analytic - numeric| divided by
    max(max|analytic|, max|numeric|, 1e-6).
    """
    analytic = backward(loss_fn(), params)
    errors = {}
    for i, (p, a) in enumerate(zip(params, analytic)):
        n = numeric_gradient(loss_fn, p, h)
        denom = max(float(np.abs(a).max(initial=0.0)), float(np.abs(n).max(initial=0.0)), 1e-6)
        errors[i] = float(np.abs(a - n).max(initial=0.0)) / denom
    return errors


def max_relative_error(loss_fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> float:
    return max(gradient_errors(loss_fn, params, h).values(), default=0.0)
