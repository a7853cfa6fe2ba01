#!/usr/bin/env python3
"""
Tensor core: dataset container, block / hyper-block partitioning,
normalization and exact inverse reassembly.

Blocks are flattened row-major with axes in dataset order and enumerated in
lexicographic block-origin order. Edge blocks are zero-padded so every block
has the same length D = prod(block_shape).
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from src.errors import ConfigError, MissingBlock, NonFiniteValue, RankMismatch, ShapeMismatch, require

logger = logging.getLogger(__name__)

AXIS_ROLES = ("variable", "time", "space")
NORM_MODES = ("zscore", "mean0range1", "none")


# ---------- Domain types ----------
@dataclass
class Dataset:
    """N-dimensional float32 array with one role tag per axis"""

    values: np.ndarray
    axis_roles: Tuple[str, ...]

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        self.axis_roles = tuple(self.axis_roles)
        require(len(self.axis_roles) == self.values.ndim, RankMismatch,
                "axis_roles must tag every axis", ndim=self.values.ndim, roles=list(self.axis_roles))
        bad = [r for r in self.axis_roles if r not in AXIS_ROLES]
        require(not bad, ShapeMismatch, f"unknown axis roles {bad}")
        require(bool(np.isfinite(self.values).all()), NonFiniteValue, "dataset contains NaN or Inf")

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape)

    @property
    def size(self) -> int:
        return int(self.values.size)

    @property
    def nbytes(self) -> int:
        return self.size * 4


@dataclass(frozen=True)
class BlockSpec:
    block_shape: Tuple[int, ...]
    hyper_k: int = 1
    hyper_axis: int = 0

    def validate(self, shape: Sequence[int]) -> None:
        require(len(self.block_shape) == len(shape), RankMismatch,
                f"block rank {len(self.block_shape)} != dataset rank {len(shape)}",
                block_shape=list(self.block_shape), shape=list(shape))
        for b, s in zip(self.block_shape, shape):
            require(0 < b <= s, ShapeMismatch, f"block extent {b} invalid for axis of length {s}")
        require(self.hyper_k >= 1, ShapeMismatch, "hyper_k must be >= 1")
        require(0 <= self.hyper_axis < len(shape), ShapeMismatch, f"hyper_axis {self.hyper_axis} out of range")

    @property
    def block_dim(self) -> int:
        return int(np.prod(self.block_shape))

    def grid_shape(self, shape: Sequence[int]) -> Tuple[int, ...]:
        return tuple(-(-s // b) for s, b in zip(shape, self.block_shape))

    def num_blocks(self, shape: Sequence[int]) -> int:
        return int(np.prod(self.grid_shape(shape)))

    def to_dict(self) -> Dict[str, Any]:
        return {"block_shape": list(self.block_shape), "hyper_k": self.hyper_k, "hyper_axis": self.hyper_axis}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "BlockSpec":
        return cls(tuple(int(b) for b in d["block_shape"]), int(d.get("hyper_k", 1)), int(d.get("hyper_axis", 0)))


@dataclass
class NormStats:
    mode: str
    mean: float
    scale: float
    group_axis: Optional[int] = None
    group_index: Optional[int] = None
    constant: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {"mode": self.mode, "mean": float(self.mean), "scale": float(self.scale),
                "group_axis": self.group_axis, "group_index": self.group_index, "constant": self.constant}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "NormStats":
        return cls(d["mode"], float(d["mean"]), float(d["scale"]), d.get("group_axis"),
                   d.get("group_index"), bool(d.get("constant", False)))


@dataclass
class Block:
    index: Tuple[int, ...]  # element coordinates of the block origin
    data: np.ndarray


# ---------- Normalization ----------
def _group_selectors(shape: Sequence[int], group_axis: Optional[int]) -> List[Tuple[Any, ...]]:
    if group_axis is None:
        return [tuple(slice(None) for _ in shape)]
    require(0 <= group_axis < len(shape), ShapeMismatch, f"group_axis {group_axis} out of range")
    sels = []
    for g in range(shape[group_axis]):
        sel = [slice(None)] * len(shape)
        sel[group_axis] = g
        sels.append(tuple(sel))
    return sels


def normalize(ds: Dataset, mode: str = "mean0range1",
              group_axis: Optional[int] = None) -> Tuple[Dataset, List[NormStats]]:
    """
    Per-group normalization. mean0range1 subtracts the mean and divides by the
    range; zscore divides by the population standard deviation. A group with
    zero spread keeps scale 1 and is flagged constant.
    """
    require(mode in NORM_MODES, ConfigError, f"unknown normalization mode {mode!r}")
    values = ds.values.astype(np.float64)
    out = np.empty_like(values)
    stats: List[NormStats] = []
    for gi, sel in enumerate(_group_selectors(values.shape, group_axis)):
        v = values[sel]
        mean, scale, constant = 0.0, 1.0, False
        if mode != "none":
            mean = float(v.mean())
            if mode == "mean0range1":
                spread = float(v.max() - v.min())
            else:
                spread = float(np.sqrt(np.mean((v - mean) ** 2)))
            if spread > 0.0:
                scale = spread
            else:
                constant = True
                logger.warning("constant group %s (mode=%s); scale forced to 1", gi, mode)
        out[sel] = (v - mean) / scale
        stats.append(NormStats(mode, mean, scale, group_axis, gi if group_axis is not None else None, constant))
    return Dataset(out.astype(np.float32), ds.axis_roles), stats


def denormalize_array(values: np.ndarray, stats: Sequence[NormStats]) -> np.ndarray:
    """Inverse of normalize in 64-bit; returns a float64 array"""
    out = np.asarray(values, dtype=np.float64).copy()
    group_axis = stats[0].group_axis if stats else None
    for st, sel in zip(stats, _group_selectors(out.shape, group_axis)):
        out[sel] = out[sel] * st.scale + st.mean
    return out


def denormalize(ds: Dataset, stats: Sequence[NormStats]) -> Dataset:
    return Dataset(denormalize_array(ds.values, stats).astype(np.float32), ds.axis_roles)


# ---------- Partitioning ----------
class BlockGrid(Sequence[Block]):
    """N x D block matrix plus the geometry needed to invert it"""

    def __init__(self, data: np.ndarray, spec: BlockSpec, shape: Sequence[int],
                 axis_roles: Optional[Sequence[str]] = None):
        self.data = data
        self.spec = spec
        self.shape = tuple(int(s) for s in shape)
        self.axis_roles = tuple(axis_roles) if axis_roles is not None else ("space",) * len(self.shape)
        self.grid_shape = spec.grid_shape(self.shape)

    def __len__(self) -> int:
        return int(self.data.shape[0])

    def __getitem__(self, i):  # type: ignore[override]
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return Block(self.origin(i), self.data[i])

    def origin(self, i: int) -> Tuple[int, ...]:
        g = np.unravel_index(int(i), self.grid_shape)
        return tuple(int(a) * b for a, b in zip(g, self.spec.block_shape))

    @property
    def padded_shape(self) -> Tuple[int, ...]:
        return tuple(g * b for g, b in zip(self.grid_shape, self.spec.block_shape))

    @property
    def pad_mask(self) -> np.ndarray:
        """True where a block entry holds real data (False on zero padding)"""
        return partition_array(np.ones(self.shape, dtype=bool), self.spec)

    def pad_descriptor(self) -> Dict[str, Any]:
        return {"shape": list(self.shape), "padded_shape": list(self.padded_shape)}


def partition_array(values: np.ndarray, spec: BlockSpec) -> np.ndarray:
    shape = values.shape
    spec.validate(shape)
    grid = spec.grid_shape(shape)
    padded = tuple(g * b for g, b in zip(grid, spec.block_shape))
    buf = values
    if padded != tuple(shape):
        buf = np.zeros(padded, dtype=values.dtype)
        buf[tuple(slice(0, s) for s in shape)] = values
    r = len(shape)
    split = buf.reshape([x for g, b in zip(grid, spec.block_shape) for x in (g, b)])
    perm = list(range(0, 2 * r, 2)) + list(range(1, 2 * r, 2))
    return np.ascontiguousarray(split.transpose(perm)).reshape(int(np.prod(grid)), spec.block_dim)


def reassemble_array(block_data: np.ndarray, spec: BlockSpec, shape: Sequence[int]) -> np.ndarray:
    shape = tuple(shape)
    grid = spec.grid_shape(shape)
    n = int(np.prod(grid))
    require(block_data.shape == (n, spec.block_dim), ShapeMismatch,
            f"expected {(n, spec.block_dim)} block matrix, got {block_data.shape}")
    r = len(shape)
    tiled = block_data.reshape(tuple(grid) + tuple(spec.block_shape))
    perm = [i for d in range(r) for i in (d, r + d)]
    padded = tiled.transpose(perm).reshape([g * b for g, b in zip(grid, spec.block_shape)])
    return np.ascontiguousarray(padded[tuple(slice(0, s) for s in shape)])


def partition(ds: Dataset, spec: BlockSpec) -> BlockGrid:
    return BlockGrid(partition_array(ds.values, spec), spec, ds.shape, ds.axis_roles)


def reassemble(blocks: Union[BlockGrid, Sequence[Block]], spec: BlockSpec,
               stats: Optional[Sequence[NormStats]] = None, *,
               shape: Optional[Sequence[int]] = None,
               axis_roles: Optional[Sequence[str]] = None) -> Dataset:
    """Inverse of partition: strips padding and applies denormalization when stats are given"""
    if isinstance(blocks, BlockGrid):
        data, shape = blocks.data, blocks.shape
        axis_roles = axis_roles or blocks.axis_roles
    else:
        require(shape is not None, ShapeMismatch, "shape is required when reassembling a block list")
        grid = spec.grid_shape(shape)
        by_origin = {tuple(b.index): b.data for b in blocks}
        rows = []
        for gi in np.ndindex(*grid):
            origin = tuple(int(a) * b for a, b in zip(gi, spec.block_shape))
            if origin not in by_origin:
                raise MissingBlock(f"block at origin {origin} is missing", {"origin": list(origin)})
            rows.append(np.asarray(by_origin[origin]))
        data = np.stack(rows) if rows else np.zeros((0, spec.block_dim), dtype=np.float32)
    values = reassemble_array(np.asarray(data), spec, shape)
    if stats:
        values = denormalize_array(values, stats)
    roles = axis_roles or ("space",) * len(shape)
    return Dataset(values.astype(np.float32), roles)


# ---------- Hyper-blocks ----------
@dataclass
class HyperBlockLayout:
    """Block ids (H x k) of each hyper-block; short tails repeat their final block"""

    ids: np.ndarray
    pad_counts: np.ndarray
    num_blocks: int = field(default=0)

    def __len__(self) -> int:
        return int(self.ids.shape[0])

    @property
    def k(self) -> int:
        return int(self.ids.shape[1])

    @property
    def real_mask(self) -> np.ndarray:
        return np.arange(self.k)[None, :] < (self.k - self.pad_counts)[:, None]

    def gather(self, block_data: np.ndarray) -> np.ndarray:
        return block_data[self.ids]

    def scatter(self, hyper_data: np.ndarray) -> np.ndarray:
        """Drop padded repeats and put every block back at its partition position"""
        mask = self.real_mask
        out = np.empty((self.num_blocks,) + hyper_data.shape[2:], dtype=hyper_data.dtype)
        out[self.ids[mask]] = hyper_data[mask]
        return out


def group_hyper(blocks: BlockGrid, spec: BlockSpec) -> HyperBlockLayout:
    """Group runs of hyper_k consecutive blocks along hyper_axis"""
    k, axis = spec.hyper_k, spec.hyper_axis
    grid = blocks.grid_shape
    ids = np.arange(len(blocks), dtype=np.int64).reshape(grid)
    lines = np.moveaxis(ids, axis, -1).reshape(-1, grid[axis])
    rows, pads = [], []
    for line in lines:
        for s in range(0, len(line), k):
            chunk = line[s:s + k]
            pad = k - len(chunk)
            if pad:
                chunk = np.concatenate([chunk, np.repeat(chunk[-1:], pad)])
            rows.append(chunk)
            pads.append(pad)
    return HyperBlockLayout(np.asarray(rows, dtype=np.int64), np.asarray(pads, dtype=np.int64), len(blocks))


# ---------- Ingestion ----------
def _read_header(path: Path) -> Dict[str, List[str]]:
    header = {}
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#") or ":" not in line:
            continue
        key, val = line.split(":", 1)
        header[key.strip().lower()] = val.replace(",", " ").split()
    return header


def header_path_for(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix(".hdr")


def load_dataset(path: Union[str, Path], header: Optional[Union[str, Path]] = None) -> Dataset:
    """Read raw little-endian float32 + sidecar header, or a small CSV array"""
    path = Path(path)
    hdr_path = Path(header) if header else header_path_for(path)
    meta = _read_header(hdr_path) if hdr_path.exists() else {}
    if path.suffix.lower() == ".csv":
        values = pd.read_csv(path, header=None).to_numpy(dtype=np.float32)
        if "shape" in meta:
            values = values.reshape([int(s) for s in meta["shape"]])
    else:
        require("shape" in meta, ShapeMismatch, f"missing shape header for {path}", header=str(hdr_path))
        shape = [int(s) for s in meta["shape"]]
        flat = np.fromfile(path, dtype="<f4")
        require(flat.size == int(np.prod(shape)), ShapeMismatch,
                f"{path} holds {flat.size} values, header says {shape}")
        values = flat.reshape(shape)
    roles = tuple(meta.get("axes", ("space",) * values.ndim))
    logger.info("loaded %s shape=%s axes=%s", path.name, values.shape, roles)
    return Dataset(values, roles)


def save_dataset(ds: Dataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ds.values.astype("<f4").tofile(path)
    header_path_for(path).write_text(
        f"shape: {' '.join(str(s) for s in ds.shape)}\naxes: {' '.join(ds.axis_roles)}\n", encoding="utf-8")
    return path
