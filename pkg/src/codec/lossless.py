#!/usr/bin/env python3
"""
Pluggable lossless byte backend.

Container: u8 backend tag | u64 raw length | backend body (little-endian).
"""

import struct
import zlib

import zstandard as zstd

from src.errors import ConfigError, CorruptPayload

BACKENDS = {"store": 0, "zlib": 1, "zstd": 2}
_TAGS = {v: k for k, v in BACKENDS.items()}
_HEADER = struct.Struct("<BQ")
ZSTD_LEVEL = 19
ZLIB_LEVEL = 9


def lossless_pack(data: bytes, backend: str = "zstd") -> bytes:
    if backend not in BACKENDS:
        raise ConfigError(f"unknown lossless backend {backend!r}", {"backend": backend, "known": sorted(BACKENDS)})
    data = bytes(data)
    if backend == "zstd":
        body = zstd.ZstdCompressor(level=ZSTD_LEVEL).compress(data)
    elif backend == "zlib":
        body = zlib.compress(data, ZLIB_LEVEL)
    else:
        body = data
    return _HEADER.pack(BACKENDS[backend], len(data)) + body


def lossless_unpack(blob: bytes) -> bytes:
    if len(blob) < _HEADER.size:
        raise CorruptPayload("lossless container shorter than its header", {"size": len(blob)})
    tag, raw_len = _HEADER.unpack_from(blob)
    body = bytes(blob[_HEADER.size:])
    if tag not in _TAGS:
        raise CorruptPayload(f"unknown backend tag {tag}", {"tag": tag})
    try:
        if _TAGS[tag] == "zstd":
            out = zstd.ZstdDecompressor().decompress(body, max_output_size=raw_len) if raw_len else b""
        elif _TAGS[tag] == "zlib":
            out = zlib.decompress(body)
        else:
            out = body
    except (zstd.ZstdError, zlib.error) as e:
        raise CorruptPayload(f"{_TAGS[tag]} payload failed to decompress: {e}", {"backend": _TAGS[tag]}) from e
    if len(out) != raw_len:
        raise CorruptPayload("decompressed length disagrees with the container header",
                             {"expected": raw_len, "got": len(out)})
    return out


def backend_of(blob: bytes) -> str:
    if not blob:
        raise CorruptPayload("empty lossless container")
    if blob[0] not in _TAGS:
        raise CorruptPayload(f"unknown backend tag {blob[0]}", {"tag": blob[0]})
    return _TAGS[blob[0]]
