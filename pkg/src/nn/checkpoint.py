#!/usr/bin/env python3
"""
Model checkpoint file.

  magic  "GCNN" | u32 version | u64 seed | u32 len + canonical JSON header
  u32 tensor count, then per tensor:
  u16 len + utf-8 name | u8 ndim | u32 dims... | float32 little-endian values
"""

import hashlib
import struct
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np
import orjson

from src.errors import TruncatedFile, VersionMismatch
from src.nn.layers import Module

MAGIC = b"GCNN"
VERSION = 1


@dataclass
class Checkpoint:
    kind: str
    config: Dict[str, Any]
    seed: int
    state: Dict[str, np.ndarray]


def dump_checkpoint(module: Module, kind: str, config: Dict[str, Any], seed: int) -> bytes:
    header = orjson.dumps({"kind": kind, "config": config}, option=orjson.OPT_SORT_KEYS)
    named = module.named_parameters()
    parts = [MAGIC, struct.pack("<IQI", VERSION, seed, len(header)), header, struct.pack("<I", len(named))]
    for name, p in named:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
        parts.append(struct.pack("<B", p.value.ndim) + struct.pack(f"<{p.value.ndim}I", *p.value.shape))
        parts.append(p.value.astype("<f4").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf, self.pos = buf, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFile("checkpoint ends early", {"needed": self.pos + n, "size": len(self.buf)})
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(buf: bytes) -> Checkpoint:
    r = _Reader(buf)
    if r.take(4) != MAGIC:
        raise VersionMismatch("not a model checkpoint (bad magic)")
    version, seed, hlen = r.unpack("<IQI")
    if version != VERSION:
        raise VersionMismatch(f"checkpoint version {version} unsupported", {"version": version})
    header = orjson.loads(r.take(hlen))
    (count,) = r.unpack("<I")
    state = {}
    for _ in range(count):
        (nlen,) = r.unpack("<H")
        name = r.take(nlen).decode("utf-8")
        (ndim,) = r.unpack("<B")
        shape = r.unpack(f"<{ndim}I")
        n = int(np.prod(shape)) if ndim else 1
        state[name] = np.frombuffer(r.take(4 * n), dtype="<f4").astype(np.float64).reshape(shape)
    return Checkpoint(header["kind"], header["config"], int(seed), state)


def digest(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()
