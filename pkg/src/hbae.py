#!/usr/bin/env python3
"""
Hyper-block autoencoder.

Encoder: every block of a hyper-block is embedded by a two-layer ReLU net,
the k embeddings pass through LayerNorm + self-attention with a residual
connection, and the flattened result is projected to the latent vector.
The decoder mirrors it with its own attention parameters.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.errors import ConfigError, ShapeMismatch, require
from src.nn import autograd as ag
from src.nn.autograd import Tensor, no_grad
from src.nn.checkpoint import Checkpoint
from src.nn.layers import EmbeddingNet, LayerNorm, Linear, Module, SelfAttention
from src.nn.trainer import fit
from src.parallel import map_chunks

logger = logging.getLogger(__name__)


@dataclass
class HbaeConfig:
    block_dim: int
    hyper_k: int = 1
    embed_dim: int = 128
    latent_dim: int = 128
    hidden_dim: int = 256
    d_k: Optional[int] = None
    use_attention: bool = True

    def __post_init__(self):
        if self.d_k is None:
            self.d_k = self.embed_dim
        for name in ("block_dim", "hyper_k", "embed_dim", "latent_dim", "hidden_dim", "d_k"):
            require(int(getattr(self, name)) > 0, ConfigError, f"hbae {name} must be positive",
                    field=name, value=getattr(self, name))
        require(self.latent_dim < self.hyper_k * self.embed_dim, ConfigError,
                "hbae latent_dim must be smaller than hyper_k * embed_dim",
                latent_dim=self.latent_dim, bound=self.hyper_k * self.embed_dim)

    @property
    def d_v(self) -> int:
        # the residual connection adds attention output to the embedding
        return self.embed_dim

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "HbaeConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


class HbaeModel(Module):
    def __init__(self, config: HbaeConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        c = config
        rng = np.random.default_rng(seed)
        self.embed = EmbeddingNet(c.block_dim, c.hidden_dim, c.embed_dim, rng)
        if c.use_attention:
            self.enc_norm = LayerNorm(c.embed_dim)
            self.enc_attn = SelfAttention(c.embed_dim, c.d_k, c.d_v, rng)
        self.project = Linear(c.hyper_k * c.embed_dim, c.latent_dim, rng)
        self.expand = Linear(c.latent_dim, c.hyper_k * c.embed_dim, rng)
        if c.use_attention:
            self.dec_norm = LayerNorm(c.embed_dim)
            self.dec_attn = SelfAttention(c.embed_dim, c.d_k, c.d_v, rng)
        self.unembed = EmbeddingNet(c.embed_dim, c.hidden_dim, c.block_dim, rng)
        self.round_to_float32()

    @staticmethod
    def _mix(e: Tensor, norm: Optional[LayerNorm], attn: Optional[SelfAttention]) -> Tensor:
        if attn is None:
            return e
        return ag.add(attn(norm(e)), e)

    def encode(self, x: Tensor) -> Tensor:
        """(B, k, D) -> (B, L_h)"""
        c = self.config
        if x.shape[-2:] != (c.hyper_k, c.block_dim):
            raise ShapeMismatch(f"hyper-block must be {c.hyper_k}x{c.block_dim}, got {x.shape}",
                                {"expected": [c.hyper_k, c.block_dim], "got": list(x.shape)})
        e = self.embed(x)
        mixed = self._mix(e, getattr(self, "enc_norm", None), getattr(self, "enc_attn", None))
        flat = ag.reshape(mixed, x.shape[:-2] + (c.hyper_k * c.embed_dim,))
        return self.project(flat)

    def decode(self, z: Tensor) -> Tensor:
        """(B, L_h) -> (B, k, D)"""
        c = self.config
        if z.shape[-1] != c.latent_dim:
            raise ShapeMismatch(f"latent must have length {c.latent_dim}, got {z.shape[-1]}")
        e = ag.reshape(self.expand(z), z.shape[:-1] + (c.hyper_k, c.embed_dim))
        mixed = self._mix(e, getattr(self, "dec_norm", None), getattr(self, "dec_attn", None))
        return self.unembed(mixed)

    def forward(self, x: Tensor) -> Tensor:
        return self.decode(self.encode(x))

    def checkpoint_config(self) -> Dict[str, Any]:
        return self.config.to_dict()

    @classmethod
    def from_checkpoint(cls, ckpt: Checkpoint) -> "HbaeModel":
        require(ckpt.kind == "hbae", ConfigError, f"checkpoint holds a {ckpt.kind!r} model, expected hbae")
        model = cls(HbaeConfig.from_dict(ckpt.config), ckpt.seed)
        model.load_state_dict(ckpt.state)
        return model


# ---------- inference ----------
def hbae_encode(hb: np.ndarray, model: HbaeModel) -> np.ndarray:
    """One hyper-block (k, D) -> (L_h,), or a batch (B, k, D) -> (B, L_h); 64-bit"""
    hb = np.asarray(hb, dtype=np.float64)
    if hb.ndim not in (2, 3):
        raise ShapeMismatch(f"hyper-block array must be 2-D or 3-D, got {hb.ndim}-D", {"shape": list(hb.shape)})
    with no_grad():
        if hb.ndim == 2:
            return model.encode(Tensor(hb[None])).value[0]
        return model.encode(Tensor(hb)).value


def hbae_decode(latent: np.ndarray, model: HbaeModel) -> np.ndarray:
    """(L_h,) -> (k, D), or (B, L_h) -> (B, k, D); 64-bit"""
    latent = np.asarray(latent, dtype=np.float64)
    with no_grad():
        if latent.ndim == 1:
            return model.decode(Tensor(latent[None])).value[0]
        return model.decode(Tensor(latent)).value


def encode_all(hyper_data: np.ndarray, model: HbaeModel, workers: Optional[int] = None) -> np.ndarray:
    """(H, k, D) -> float32 latents (H, L_h)"""
    out = map_chunks(lambda chunk: hbae_encode(chunk, model), np.asarray(hyper_data, dtype=np.float64), workers)
    return out.astype(np.float32)


def decode_all(latents: np.ndarray, model: HbaeModel, workers: Optional[int] = None) -> np.ndarray:
    """(H, L_h) -> float64 reconstructions (H, k, D)"""
    return map_chunks(lambda chunk: hbae_decode(chunk, model), np.asarray(latents, dtype=np.float64), workers)


# ---------- training ----------
def hbae_train(hyperblocks: np.ndarray, config: HbaeConfig, epochs: int, batch: int = 32, seed: int = 0,
               lr: float = 1e-3) -> Tuple[HbaeModel, List[float]]:
    """
    Minimize MSE(x, decode(encode(x))) over hyper-blocks (H, k, D). Weights are
    snapped to 32-bit precision afterwards so the in-memory model equals the
    one restored from a checkpoint.
    """
    data = np.asarray(hyperblocks, dtype=np.float64)
    require(data.ndim == 3 and data.shape[0] >= 1, ShapeMismatch,
            "hbae_train needs at least one hyper-block shaped (H, k, D)", shape=list(data.shape))
    model = HbaeModel(config, seed)
    logger.info("training HBAE on %d hyper-blocks (k=%d, D=%d, L_h=%d, attention=%s, params=%d)",
                data.shape[0], config.hyper_k, config.block_dim, config.latent_dim, config.use_attention,
                model.num_parameters())
    losses = fit(model, data, data, epochs, batch, lr=lr, seed=seed, label="hbae")
    model.round_to_float32()
    return model, losses
