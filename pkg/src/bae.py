#!/usr/bin/env python3
"""
Block-wise residual autoencoder.

Refines the HBAE output y of each block: the residual x - y is rescaled with a
single dataset-wide (mean, std) pair, encoded to L_b values and decoded back,
so x^R = denorm(D(E(norm(x - y)))) + y. The rescaling pair is learned at
training time and travels with the model, so decoding needs no per-block
side-info.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.errors import ConfigError, ShapeMismatch, require
from src.nn.autograd import Tensor, no_grad
from src.nn.checkpoint import Checkpoint
from src.nn.layers import EmbeddingNet, Module
from src.nn.trainer import fit
from src.parallel import map_chunks

logger = logging.getLogger(__name__)


@dataclass
class BaeConfig:
    block_dim: int
    latent_dim: int = 16
    hidden_dim: Optional[int] = None

    def __post_init__(self):
        if self.hidden_dim is None:
            self.hidden_dim = 4 * self.latent_dim
        for name in ("block_dim", "latent_dim", "hidden_dim"):
            require(int(getattr(self, name)) > 0, ConfigError, f"bae {name} must be positive",
                    field=name, value=getattr(self, name))
        require(self.latent_dim < self.block_dim, ConfigError, "bae latent_dim must be smaller than block_dim",
                latent_dim=self.latent_dim, block_dim=self.block_dim)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "BaeConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class ResidualScale:
    mean: float = 0.0
    std: float = 1.0

    @classmethod
    def fit(cls, residuals: np.ndarray) -> "ResidualScale":
        r = np.asarray(residuals, dtype=np.float64)
        if r.size == 0:
            return cls()
        mean = float(r.mean())
        std = float(np.sqrt(np.mean((r - mean) ** 2)))
        if not std > 0.0:
            logger.warning("residuals have zero spread; residual scale forced to 1")
            std = 1.0
        return cls(mean, std)

    def apply(self, r: np.ndarray) -> np.ndarray:
        return (r - self.mean) / self.std

    def invert(self, rn: np.ndarray) -> np.ndarray:
        return rn * self.std + self.mean

    def to_dict(self) -> Dict[str, float]:
        return {"mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ResidualScale":
        return cls(float(d["mean"]), float(d["std"]))


class BaeModel(Module):
    def __init__(self, config: BaeConfig, seed: int = 0, scale: Optional[ResidualScale] = None):
        self.config = config
        self.seed = seed
        self.scale = scale or ResidualScale()
        rng = np.random.default_rng([seed, 2])
        self.encoder = EmbeddingNet(config.block_dim, config.hidden_dim, config.latent_dim, rng)
        self.decoder = EmbeddingNet(config.latent_dim, config.hidden_dim, config.block_dim, rng)
        self.round_to_float32()

    def encode(self, rn: Tensor) -> Tensor:
        if rn.shape[-1] != self.config.block_dim:
            raise ShapeMismatch(f"block must have length {self.config.block_dim}, got {rn.shape[-1]}",
                                {"expected": self.config.block_dim, "got": rn.shape[-1]})
        return self.encoder(rn)

    def decode(self, z: Tensor) -> Tensor:
        if z.shape[-1] != self.config.latent_dim:
            raise ShapeMismatch(f"latent must have length {self.config.latent_dim}, got {z.shape[-1]}")
        return self.decoder(z)

    def forward(self, rn: Tensor) -> Tensor:
        return self.decode(self.encode(rn))

    def checkpoint_config(self) -> Dict[str, Any]:
        return {**self.config.to_dict(), "residual_scale": self.scale.to_dict()}

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "BaeModel":
        require(ckpt.kind == "bae", ConfigError, f"checkpoint holds a {ckpt.kind!r} model, expected bae")
        scale = ResidualScale.from_dict(ckpt.config.get("residual_scale", {"mean": 0.0, "std": 1.0}))
        model = cls(BaeConfig.from_dict(ckpt.config), ckpt.seed, scale)
        model.load_state_dict(ckpt.state)
        return model


# ---------- inference ----------
def bae_encode(x: np.ndarray, y: np.ndarray, model: BaeModel) -> Tuple[np.ndarray, ResidualScale]:
    """Latent of the residual x - y plus the scale needed to invert it; (D,) or (N, D) inputs"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    require(x.shape == y.shape, ShapeMismatch, f"x {x.shape} and y {y.shape} differ",
            x=list(x.shape), y=list(y.shape))
    rn = model.scale.apply(x - y)
    with no_grad():
        z = model.encode(Tensor(np.atleast_2d(rn))).value
    return (z[0] if x.ndim == 1 else z), model.scale


def bae_decode(latent: np.ndarray, y: np.ndarray, side: ResidualScale, model: BaeModel) -> np.ndarray:
    """x^R = denorm(D(latent)) + y in 64-bit"""
    latent = np.asarray(latent, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    with no_grad():
        d = model.decode(Tensor(np.atleast_2d(latent))).value
    residual = side.invert(d)
    if latent.ndim == 1:
        residual = residual[0]
    require(residual.shape == y.shape, ShapeMismatch, f"decoded residual {residual.shape} vs y {y.shape}")
    return residual + y


def encode_all(x: np.ndarray, y: np.ndarray, model: BaeModel, workers: Optional[int] = None) -> np.ndarray:
    """(N, D) pairs -> float32 latents (N, L_b)"""
    stacked = np.stack([np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)], axis=1)
    out = map_chunks(lambda c: bae_encode(c[:, 0], c[:, 1], model)[0], stacked, workers)
    return out.astype(np.float32)


def decode_all(latents: np.ndarray, y: np.ndarray, model: BaeModel, workers: Optional[int] = None) -> np.ndarray:
    """(N, L_b) latents + (N, D) HBAE output -> float64 x^R (N, D)"""
    latents = np.asarray(latents, dtype=np.float64)
    L = latents.shape[1]
    stacked = np.concatenate([latents, np.asarray(y, dtype=np.float64)], axis=1)
    return map_chunks(lambda c: bae_decode(c[:, :L], c[:, L:], model.scale, model), stacked, workers)


# ---------- training ----------
def bae_train(x: np.ndarray, y: np.ndarray, config: BaeConfig, epochs: int, batch: int = 64, seed: int = 0,
              lr: float = 1e-3) -> Tuple[BaeModel, List[float]]:
    """
    Fit the residual model on block pairs (x, y) where y is the HBAE
    reconstruction of x. Losses are reported in the rescaled residual domain.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    require(x.shape == y.shape and x.ndim == 2 and x.shape[0] >= 1, ShapeMismatch,
            "bae_train needs matching (N, D) block pairs", x=list(x.shape), y=list(y.shape))
    scale = ResidualScale.fit(x - y)
    model = BaeModel(config, seed, scale)
    rn = scale.apply(x - y)
    logger.info("training BAE on %d blocks (D=%d, L_b=%d, residual std=%.3e)",
                x.shape[0], config.block_dim, config.latent_dim, scale.std)
    losses = fit(model, rn, rn, epochs, batch, lr=lr, seed=seed, label="bae")
    model.round_to_float32()
    return model, losses
