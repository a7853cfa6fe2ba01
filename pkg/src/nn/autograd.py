#!/usr/bin/env python3
"""
Minimal reverse-mode autodiff over numpy arrays (64-bit).

Every op returns a Tensor that remembers its parents and a closure that
pushes the output gradient back to them. `backward` walks the recorded graph
in reverse topological order. Arrays may carry leading batch axes; gradients
of broadcast operands are summed back to the operand shape.
"""

import contextlib
import threading
from typing import Callable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import NonFiniteValue, ShapeMismatch

# Recording flag, one per thread.
_local = threading.local()


def grad_enabled() -> bool:
    return getattr(_local, "enabled", True)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    prev = grad_enabled()
    _local.enabled = False
    try:
        yield
    finally:
        _local.enabled = prev


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.name = name
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple["Tensor", ...] = ()
        self._backward: Optional[Callable[[np.ndarray], None]] = None

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        g = _unbroadcast(g, self.value.shape)
        self.grad = g.copy() if self.grad is None else self.grad + g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, name={self.name!r}, requires_grad={self.requires_grad})"


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _result(value: np.ndarray, parents: Sequence[Tensor], backward: Callable[[np.ndarray], None], op: str) -> Tensor:
    if not np.isfinite(value).all():
        raise NonFiniteValue(f"non-finite output from {op}", {"op": op})
    out = Tensor(value)
    if grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


# ---------- primitive ops ----------
def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape[-1] != b.value.shape[-2]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}", {"a": list(a.shape), "b": list(b.shape)})
    out_val = a.value @ b.value

    def backward(g: np.ndarray) -> None:
        a._accumulate(g @ np.swapaxes(b.value, -1, -2))
        b._accumulate(np.swapaxes(a.value, -1, -2) @ g)

    return _result(out_val, (a, b), backward, "matmul")


def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        a._accumulate(g)
        b._accumulate(g)

    return _result(a.value + b.value, (a, b), backward, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(g: np.ndarray) -> None:
        a._accumulate(g)
        b._accumulate(-g)

    return _result(a.value - b.value, (a, b), backward, "sub")


def scale(a: Tensor, c: float) -> Tensor:
    def backward(g: np.ndarray) -> None:
        a._accumulate(g * c)

    return _result(a.value * c, (a,), backward, "scale")


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0

    def backward(g: np.ndarray) -> None:
        a._accumulate(g * mask)

    return _result(a.value * mask, (a,), backward, "relu")


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    src_shape = a.value.shape

    def backward(g: np.ndarray) -> None:
        a._accumulate(g.reshape(src_shape))

    return _result(a.value.reshape(tuple(shape)), (a,), backward, "reshape")


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes"""
    def backward(g: np.ndarray) -> None:
        a._accumulate(np.swapaxes(g, -1, -2))

    return _result(np.swapaxes(a.value, -1, -2), (a,), backward, "transpose")


def softmax(a: Tensor) -> Tensor:
    """Row softmax over the last axis, stabilized by row-max subtraction"""
    z = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)

    def backward(g: np.ndarray) -> None:
        a._accumulate(s * (g - (g * s).sum(axis=-1, keepdims=True)))

    return _result(s, (a,), backward, "softmax")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    mu = x.value.mean(axis=-1, keepdims=True)
    xc = x.value - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    def backward(g: np.ndarray) -> None:
        gamma._accumulate(g * xhat)
        beta._accumulate(g)
        gx = g * gamma.value
        x._accumulate(inv * (gx - gx.mean(axis=-1, keepdims=True)
                             - xhat * (gx * xhat).mean(axis=-1, keepdims=True)))

    return _result(xhat * gamma.value + beta.value, (x, gamma, beta), backward, "layer_norm")


def mse(pred: Tensor, target: Tensor) -> Tensor:
    if pred.shape != target.shape:
        raise ShapeMismatch(f"mse {pred.shape} vs {target.shape}",
                            {"pred": list(pred.shape), "target": list(target.shape)})
    diff = pred.value - target.value
    n = diff.size

    def backward(g: np.ndarray) -> None:
        pred._accumulate(g * 2.0 * diff / n)
        target._accumulate(-g * 2.0 * diff / n)

    return _result(np.asarray((diff ** 2).sum() / n), (pred, target), backward, "mse")


# ---------- graph traversal ----------
def _topo_order(root: Tensor) -> List[Tensor]:
    order: List[Tensor] = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params: Optional[Sequence[Tensor]] = None) -> List[np.ndarray]:
    """
    Reverse pass from a scalar loss. Returns the gradient of every tensor in
    `params` (zeros for parameters the loss does not depend on).
    """
    if loss.value.size != 1:
        raise ShapeMismatch("backward needs a scalar loss", {"shape": list(loss.shape)})
    order = _topo_order(loss)
    for node in order:
        node.grad = None
    for p in params or ():
        p.grad = None
    loss.grad = np.ones_like(loss.value)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    if params is None:
        return []
    return [p.grad if p.grad is not None else np.zeros_like(p.value) for p in params]
