#!/usr/bin/env python3
"""
Selected-index bitmasks stored as their shortest prefix holding every set bit.

Payload: u32 n | n x u32 prefix length | all prefixes concatenated, packed
MSB-first and zero padded to a whole byte.
"""

import struct
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from src.errors import CorruptStream, LengthOverflow


@dataclass
class IndexBitmask:
    prefix: np.ndarray
    length: int

    def __post_init__(self):
        self.prefix = np.asarray(self.prefix, dtype=bool).reshape(-1)


def mask_from_indices(indices: Sequence[int], dim: int) -> np.ndarray:
    mask = np.zeros(dim, dtype=bool)
    mask[np.asarray(indices, dtype=np.int64)] = True
    return mask


def encode_indices(mask: np.ndarray) -> IndexBitmask:
    mask = np.asarray(mask, dtype=bool).reshape(-1)
    hits = np.flatnonzero(mask)
    length = int(hits[-1]) + 1 if hits.size else 0
    if length > mask.size:
        raise LengthOverflow(f"prefix length {length} exceeds mask size {mask.size}")
    return IndexBitmask(mask[:length].copy(), length)


def decode_indices(bitmask: IndexBitmask, dim: int) -> np.ndarray:
    if bitmask.length > dim or bitmask.prefix.size != bitmask.length:
        raise LengthOverflow(f"prefix length {bitmask.length} invalid for D={dim}",
                             {"length": bitmask.length, "dim": dim})
    mask = np.zeros(dim, dtype=bool)
    mask[:bitmask.length] = bitmask.prefix
    return mask


def pack_index_payload(bitmasks: Sequence[IndexBitmask]) -> bytes:
    lengths = np.array([b.length for b in bitmasks], dtype="<u4")
    bits = np.concatenate([b.prefix for b in bitmasks]) if bitmasks else np.zeros(0, dtype=bool)
    return struct.pack("<I", len(bitmasks)) + lengths.tobytes() + np.packbits(bits, bitorder="big").tobytes()


def unpack_index_payload(buf: bytes, dim: int) -> List[IndexBitmask]:
    if len(buf) < 4:
        raise CorruptStream("index payload shorter than its count field", {"size": len(buf)})
    (n,) = struct.unpack_from("<I", buf)
    if len(buf) < 4 + 4 * n:
        raise CorruptStream("index payload truncated in the length table", {"count": n, "size": len(buf)})
    lengths = np.frombuffer(buf, dtype="<u4", count=n, offset=4).astype(np.int64)
    if lengths.size and lengths.max() > dim:
        raise LengthOverflow(f"prefix length {int(lengths.max())} exceeds D={dim}",
                             {"length": int(lengths.max()), "dim": dim})
    total = int(lengths.sum())
    packed = np.frombuffer(buf, dtype=np.uint8, offset=4 + 4 * n)
    if packed.size != (total + 7) // 8:
        raise CorruptStream("index bit payload size disagrees with the stored lengths",
                            {"bits": total, "bytes": int(packed.size)})
    bits = np.unpackbits(packed, bitorder="big")[:total].astype(bool)
    ends = np.cumsum(lengths)
    return [IndexBitmask(bits[e - n_:e], int(n_)) for n_, e in zip(lengths, ends)]
