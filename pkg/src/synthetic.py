#!/usr/bin/env python3
"""
Desk-scale synthetic stand-ins for the application datasets.

  smooth     sums of low-frequency sinusoids over every axis (climate-like field)
  multivar   one smooth base field, per-variable affine transforms plus small
             noise (strongly correlated species, combustion-like)
  histogram  smooth nonnegative Gaussian bumps on the trailing 2-D grid whose
             centers drift along the leading axes (velocity histograms)
"""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from src.errors import ConfigError, ShapeMismatch, require
from src.tensor_core import Dataset

logger = logging.getLogger(__name__)

KINDS = ("smooth", "multivar", "histogram")


def _grid(shape: Sequence[int]) -> Tuple[np.ndarray, ...]:
    axes = [np.linspace(0.0, 1.0, n) for n in shape]
    return tuple(np.meshgrid(*axes, indexing="ij"))


def _smooth_field(shape: Sequence[int], rng: np.random.Generator, terms: int = 4) -> np.ndarray:
    coords = _grid(shape)
    out = np.zeros(tuple(shape))
    for term in range(terms):
        freq = rng.integers(0, 3, size=len(shape))
        if not freq.any():
            freq[term % len(shape)] = 1
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.5, 1.5)
        arg = sum(f * c for f, c in zip(freq, coords))
        out += amp * np.sin(2.0 * np.pi * arg + phase)
    return out


def _default_roles(kind: str, ndim: int) -> Tuple[str, ...]:
    if kind == "multivar":
        return ("variable", "time") + ("space",) * (ndim - 2) if ndim >= 2 else ("variable",)
    if kind == "histogram":
        return ("space",) * ndim
    return ("time",) + ("space",) * (ndim - 1)


def generate_synthetic(kind: str, shape: Sequence[int], seed: int = 0,
                       axis_roles: Optional[Sequence[str]] = None, noise: float = 0.01) -> Dataset:
    require(kind in KINDS, ConfigError, f"unknown synthetic kind {kind!r}", kind=kind, known=list(KINDS))
    shape = tuple(int(s) for s in shape)
    require(len(shape) >= 1 and all(s > 0 for s in shape), ShapeMismatch, f"invalid shape {shape}")
    rng = np.random.default_rng(seed)

    if kind == "smooth":
        values = _smooth_field(shape, rng)
    elif kind == "multivar":
        require(len(shape) >= 2, ShapeMismatch, "multivar needs a variable axis plus at least one more axis")
        base = _smooth_field(shape[1:], rng)
        spread = float(base.std()) or 1.0
        scale = rng.uniform(0.5, 2.0, size=shape[0])
        offset = rng.uniform(-1.0, 1.0, size=shape[0])
        values = np.stack([a * base + b + noise * spread * rng.standard_normal(shape[1:])
                           for a, b in zip(scale, offset)])
    else:
        require(len(shape) >= 2, ShapeMismatch, "histogram needs at least a 2-D grid")
        lead, grid = shape[:-2], shape[-2:]
        u, v = _grid(grid)
        values = np.zeros(shape)
        bumps = 3
        centers = rng.uniform(0.25, 0.75, size=(bumps, 2))
        drift = rng.uniform(-0.2, 0.2, size=(bumps, 2))
        widths = rng.uniform(0.08, 0.2, size=bumps)
        heights = rng.uniform(0.5, 1.5, size=bumps)
        for idx in np.ndindex(*lead) if lead else [()]:
            t = (sum(idx) / max(sum(n - 1 for n in lead), 1)) if lead else 0.0
            frame = np.zeros(grid)
            for c, d, w, h in zip(centers, drift, widths, heights):
                cu, cv = c + d * t
                frame += h * np.exp(-((u - cu) ** 2 + (v - cv) ** 2) / (2.0 * w * w))
            values[idx] = frame

    roles = tuple(axis_roles) if axis_roles is not None else _default_roles(kind, len(shape))
    logger.info("generated %s dataset shape=%s seed=%d", kind, shape, seed)
    return Dataset(values.astype(np.float32), roles)
