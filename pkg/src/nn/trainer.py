#!/usr/bin/env python3
"""Mini-batch MSE training loop shared by the autoencoders"""

import logging
import time
from typing import List

import numpy as np

from src.errors import Diverged, NonFiniteValue
from src.nn.autograd import Tensor, backward
from src.nn.layers import Module, mse_loss
from src.nn.optim import Adam

logger = logging.getLogger(__name__)


def fit(model: Module, inputs: np.ndarray, targets: np.ndarray, epochs: int, batch: int,
        lr: float = 1e-3, seed: int = 0, label: str = "model") -> List[float]:
    """
    Adam on MSE(model(inputs), targets). Samples are reshuffled every epoch with
    a generator derived from `seed`. Returns the sample-weighted mean loss of
    every epoch.
    """
    params = model.parameters()
    opt = Adam(params, lr=lr)
    rng = np.random.default_rng([seed, 1])
    n = inputs.shape[0]
    batch = max(1, min(batch, n))
    losses: List[float] = []
    t0 = time.perf_counter()
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            try:
                loss = mse_loss(model(Tensor(inputs[idx])), Tensor(targets[idx]))
            except NonFiniteValue as e:
                raise Diverged(f"{label} diverged in epoch {epoch}", {"epoch": epoch, "losses": losses}) from e
            grads = backward(loss, params)
            opt.step(grads)
            total += loss.item() * len(idx)
        epoch_loss = total / n
        if not np.isfinite(epoch_loss):
            raise Diverged(f"{label} loss became non-finite in epoch {epoch}", {"epoch": epoch, "losses": losses})
        losses.append(epoch_loss)
        if epoch == epochs - 1 or (epoch + 1) % max(1, epochs // 10) == 0:
            logger.info("%s epoch %d/%d loss=%.6e (%.1fs)", label, epoch + 1, epochs, epoch_loss,
                        time.perf_counter() - t0)
    return losses
