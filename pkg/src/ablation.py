#!/usr/bin/env python3
"""
Model-component and quantization studies at desk scale.

Every study trains fresh models from the pipeline config and reports
reconstruction error without the guarantee stage, so the numbers reflect the
autoencoders alone.
"""

import logging
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.config import PipelineConfig
from src import bae as bae_mod
from src import hbae as hbae_mod
from src.bae import BaeModel, bae_train
from src.errors import ConfigError, ShapeMismatch, ZeroRange, require
from src.hbae import HbaeModel, hbae_train
from src.metrics import nrmse
from src.pipeline import (ModelPair, Prepared, bae_config_for, decode_hbae, hbae_config_for, prepare,
                          to_original)
from src.codec import dequantize, quantize
from src.tensor_core import Dataset, reassemble_array

logger = logging.getLogger(__name__)

VARIANTS = ("baseline", "hbae_woa", "hbae", "hbae_bae")


# ---------- helpers ----------
def _mse_normalized(prep: Prepared, blocks: np.ndarray) -> float:
    recon = reassemble_array(blocks, prep.spec, prep.dataset.shape)
    return float(np.mean((prep.normalized.values.astype(np.float64) - recon) ** 2))


def _nrmse_original(prep: Prepared, blocks: np.ndarray) -> Optional[float]:
    try:
        return nrmse(prep.dataset.values, to_original(blocks, prep.spec, prep.dataset.shape, prep.stats))
    except ZeroRange:
        return None


def _hbae_blocks(prep: Prepared, model: HbaeModel, workers: Optional[int]) -> np.ndarray:
    latents = hbae_mod.encode_all(prep.hyper, model, workers)
    return prep.layout.scatter(hbae_mod.decode_all(latents, model, workers))


def _bae_blocks(prep: Prepared, y: np.ndarray, model: BaeModel, workers: Optional[int],
                bin: Optional[float] = None) -> np.ndarray:
    latents = bae_mod.encode_all(prep.grid.data, y, model, workers)
    if bin is not None:
        latents = dequantize(quantize(latents, bin)).reshape(latents.shape)
    return bae_mod.decode_all(latents, y, model, workers)


def _train_hbae(cfg: PipelineConfig, prep: Prepared, seed: int, latent_dim: int,
                use_attention: bool = True) -> HbaeModel:
    hcfg = replace(hbae_config_for(cfg, prep.spec.block_dim), latent_dim=latent_dim, use_attention=use_attention)
    model, _ = hbae_train(prep.hyper, hcfg, cfg.hbae.epochs, cfg.hbae.batch, seed, cfg.hbae.lr)
    return model


def _budget_latent(want: int, cap: int, variant: str) -> int:
    if want < cap:
        return want
    logger.warning("%s: latent budget %d clipped to %d (must stay below k * embed_dim)", variant, want, cap - 1)
    return cap - 1


# ---------- component ablation ----------
def component_ablation(dataset: Dataset, cfg: PipelineConfig, seeds: Sequence[int] = (0, 1, 2)) -> pd.DataFrame:
    """
    Mean normalized-domain MSE per model variant at an equal latent budget
    per hyper-block (L_h + k * L_b). Latents are left unquantized.
    """
    require(len(seeds) > 0, ConfigError, "component_ablation needs at least one seed")
    k = cfg.hyper_k
    budget = cfg.hbae.latent_dim + k * cfg.bae.latent_dim
    prep = prepare(cfg, dataset)
    flat_cfg = replace(cfg, hyper_k=1)
    flat = prepare(flat_cfg, dataset)
    cap = k * cfg.hbae.embed_dim
    rows = []
    for seed in seeds:
        per_block = _budget_latent(max(budget // k, 1), cfg.hbae.embed_dim, "baseline")
        base = _train_hbae(flat_cfg, flat, seed, per_block, use_attention=False)
        rows.append(("baseline", seed, per_block * k, _mse_normalized(flat, _hbae_blocks(flat, base, cfg.workers))))

        latent = _budget_latent(budget, cap, "hbae_woa")
        woa = _train_hbae(cfg, prep, seed, latent, use_attention=False)
        rows.append(("hbae_woa", seed, latent, _mse_normalized(prep, _hbae_blocks(prep, woa, cfg.workers))))

        latent = _budget_latent(budget, cap, "hbae")
        wide = _train_hbae(cfg, prep, seed, latent)
        rows.append(("hbae", seed, latent, _mse_normalized(prep, _hbae_blocks(prep, wide, cfg.workers))))

        hbae = _train_hbae(cfg, prep, seed, cfg.hbae.latent_dim)
        y = _hbae_blocks(prep, hbae, cfg.workers)
        bae, _ = bae_train(prep.grid.data, y, bae_config_for(cfg, prep.spec.block_dim), cfg.bae.epochs,
                           cfg.bae.batch, seed, cfg.bae.lr)
        rows.append(("hbae_bae", seed, budget, _mse_normalized(prep, _bae_blocks(prep, y, bae, cfg.workers))))
        logger.info("ablation seed %d done: %s", seed, {r[0]: f"{r[3]:.3e}" for r in rows[-4:]})

    runs = pd.DataFrame(rows, columns=["variant", "seed", "latent_per_hyperblock", "mse"])
    table = (runs.groupby("variant", sort=False)
             .agg(latent_per_hyperblock=("latent_per_hyperblock", "first"), mse=("mse", "mean"),
                  mse_std=("mse", "std"), seeds=("seed", "count"))
             .reset_index())
    return table


# ---------- quantization sensitivity ----------
def quantization_sensitivity(dataset: Dataset, cfg: PipelineConfig, models: ModelPair,
                             bins: Sequence[float]) -> pd.DataFrame:
    """
    Error after the BAE stage with only one latent stream quantized. For the
    hbae rows the BAE latent stays unquantized, and the other way round.
    """
    prep = prepare(cfg, dataset)
    y_exact = _hbae_blocks(prep, models.hbae, cfg.workers)
    rows = []
    for bin in sorted(float(b) for b in bins):
        require(bin > 0, ConfigError, f"bin must be positive, got {bin}", bin=bin)
        latents = hbae_mod.encode_all(prep.hyper, models.hbae, cfg.workers)
        symbols = quantize(latents, bin).symbols.reshape(latents.shape)
        y_q = decode_hbae(symbols, prep.layout, models.hbae, bin, cfg.workers)
        for stream, blocks in (("hbae", _bae_blocks(prep, y_q, models.bae, cfg.workers)),
                               ("bae", _bae_blocks(prep, y_exact, models.bae, cfg.workers, bin))):
            rows.append({"stream": stream, "bin": bin, "mse": _mse_normalized(prep, blocks),
                         "nrmse": _nrmse_original(prep, blocks)})
    return pd.DataFrame(rows, columns=["stream", "bin", "mse", "nrmse"])


# ---------- stacking ----------
def stacked_refinement(x: np.ndarray, x_r: np.ndarray, cfg: PipelineConfig, seed: int = 0,
                       workers: Optional[int] = None) -> Tuple[Optional[BaeModel], float, float]:
    """
    Train another residual model on (x, x^R). It is returned only when it
    does not raise the MSE; otherwise (None, before, before).
    """
    x = np.asarray(x, dtype=np.float64)
    x_r = np.asarray(x_r, dtype=np.float64)
    require(x.shape == x_r.shape and x.ndim == 2, ShapeMismatch, "stacked_refinement needs matching (N, D) blocks",
            x=list(x.shape), x_r=list(x_r.shape))
    before = float(np.mean((x - x_r) ** 2))
    model, _ = bae_train(x, x_r, bae_config_for(cfg, x.shape[1]), cfg.bae.epochs, cfg.bae.batch, seed, cfg.bae.lr)
    refined = bae_mod.decode_all(bae_mod.encode_all(x, x_r, model, workers), x_r, model, workers)
    after = float(np.mean((x - refined) ** 2))
    if after > before:
        logger.info("stacked stage rejected: mse %.3e -> %.3e", before, after)
        return None, before, before
    logger.info("stacked stage kept: mse %.3e -> %.3e", before, after)
    return model, before, after


# ---------- latent size ----------
def latent_size_sweep(dataset: Dataset, cfg: PipelineConfig, latent_dims: Sequence[int],
                      seed: Optional[int] = None) -> pd.DataFrame:
    """HBAE-only NRMSE against the hyper-block to latent size ratio"""
    prep = prepare(cfg, dataset)
    values_per_hyper = cfg.hyper_k * prep.spec.block_dim
    seed = cfg.seed if seed is None else seed
    rows: List[dict] = []
    for latent in sorted(int(l) for l in latent_dims):
        model = _train_hbae(cfg, prep, seed, latent)
        blocks = _hbae_blocks(prep, model, cfg.workers)
        rows.append({"latent_dim": latent, "latent_ratio": values_per_hyper / latent,
                     "mse": _mse_normalized(prep, blocks), "nrmse": _nrmse_original(prep, blocks)})
    return pd.DataFrame(rows, columns=["latent_dim", "latent_ratio", "mse", "nrmse"])


def refinement_table(dataset: Dataset, cfg: PipelineConfig, models: ModelPair,
                     seed: Optional[int] = None) -> pd.DataFrame:
    """stacked_refinement applied to the trained pair's own x^R, normalized domain"""
    prep = prepare(cfg, dataset)
    y = _hbae_blocks(prep, models.hbae, cfg.workers)
    x_r = _bae_blocks(prep, y, models.bae, cfg.workers)
    seed = cfg.seed if seed is None else seed
    model, before, after = stacked_refinement(prep.grid.data, x_r, cfg, seed, cfg.workers)
    return pd.DataFrame([{"mse_before": before, "mse_after": after, "kept": model is not None}],
                        columns=["mse_before", "mse_after", "kept"])
