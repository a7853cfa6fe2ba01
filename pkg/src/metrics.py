#!/usr/bin/env python3
"""Reconstruction quality metrics and the evaluation report"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
import orjson
import pandas as pd

from src.errors import ShapeMismatch, ZeroRange, require
from src.tensor_core import BlockSpec, partition_array


def _pair(original, recon):
    a = np.asarray(getattr(original, "values", original), dtype=np.float64)
    b = np.asarray(getattr(recon, "values", recon), dtype=np.float64)
    require(a.shape == b.shape, ShapeMismatch, f"shapes differ: {a.shape} vs {b.shape}",
            original=list(a.shape), recon=list(b.shape))
    return a, b


def _range(a: np.ndarray) -> float:
    rng = float(a.max() - a.min()) if a.size else 0.0
    if not rng > 0.0:
        raise ZeroRange("original data has zero range", {"min": float(a.min()) if a.size else None})
    return rng


def nrmse(original, recon) -> float:
    """sqrt(mean squared error) / (max - min) of the original"""
    a, b = _pair(original, recon)
    rng = _range(a)
    return float(np.sqrt(np.mean((a - b) ** 2)) / rng)


def per_variable_nrmse(original, recon, group_axis: Optional[int]) -> List[float]:
    a, b = _pair(original, recon)
    if group_axis is None:
        return [nrmse(a, b)]
    return [nrmse(np.take(a, g, axis=group_axis), np.take(b, g, axis=group_axis)) for g in range(a.shape[group_axis])]


def max_block_error(original, recon, spec: BlockSpec) -> float:
    a, b = _pair(original, recon)
    diff = partition_array(a - b, spec)
    return float(np.linalg.norm(diff, axis=1).max()) if diff.size else 0.0


@dataclass
class Histogram:
    edges: np.ndarray
    counts: np.ndarray

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"lo": self.edges[:-1], "hi": self.edges[1:], "count": self.counts})

    def to_dict(self) -> Dict[str, Any]:
        return {"edges": self.edges.tolist(), "counts": self.counts.astype(int).tolist()}


def relative_point_error_histogram(original, recon, bins: int = 50) -> Histogram:
    """Histogram of |x - x'| / range; edges span [0, max relative error]"""
    a, b = _pair(original, recon)
    rel = np.abs(a - b).reshape(-1) / _range(a)
    top = max(float(rel.max()) if rel.size else 0.0, 1e-12)
    edges = np.linspace(0.0, top, bins + 1)
    counts, _ = np.histogram(rel, bins=edges)
    return Histogram(edges, counts.astype(np.int64))


@dataclass
class EvalReport:
    nrmse: Optional[float]
    per_variable_nrmse: List[float]
    max_block_error: float
    histogram: Optional[Histogram]
    ratios: Optional[Dict[str, float]] = None
    per_variable_ratios: Optional[List[float]] = None
    tau: Optional[float] = None
    nrmse_bound: Optional[float] = None
    timings_ms: Dict[str, float] = field(default_factory=dict)
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        d = {"nrmse": self.nrmse, "per_variable_nrmse": self.per_variable_nrmse,
             "max_block_error": self.max_block_error,
             "histogram": self.histogram.to_dict() if self.histogram is not None else None,
             "ratios": self.ratios, "per_variable_ratios": self.per_variable_ratios, "tau": self.tau,
             "nrmse_bound": self.nrmse_bound, "timings_ms": self.timings_ms, **self.extra}
        return {k: v for k, v in d.items() if v is not None}

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(orjson.dumps(self.to_dict(), option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY))
        return path
