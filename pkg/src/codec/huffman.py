#!/usr/bin/env python3
"""
Canonical Huffman coding of signed integer symbol streams.

Code lengths come from a heap-built tree; codewords are then reassigned in
canonical order (length, symbol) so a table is fully described by its
(symbol, length) pairs. Bits are written MSB-first and the stream is padded
to a byte boundary with zeros.

Table bytes:   u32 n | n x (i64 symbol, u8 length)
Stream bytes:  u64 symbol count | packed codewords
"""

import heapq
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from src.errors import CorruptStream

MAX_CODE_LENGTH = 64
_PAIR = struct.Struct("<qB")


@dataclass
class HuffmanTable:
    lengths: Dict[int, int]
    codes: Dict[int, Tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.codes:
            self.codes = canonical_codes(self.lengths)

    @property
    def max_length(self) -> int:
        return max(self.lengths.values(), default=0)

    def serialize(self) -> bytes:
        items = sorted(self.lengths.items())
        return struct.pack("<I", len(items)) + b"".join(_PAIR.pack(s, n) for s, n in items)

    @classmethod
    def deserialize(cls, buf: bytes) -> "HuffmanTable":
        if len(buf) < 4:
            raise CorruptStream("huffman table shorter than its count field", {"size": len(buf)})
        (n,) = struct.unpack_from("<I", buf)
        if len(buf) != 4 + n * _PAIR.size:
            raise CorruptStream("huffman table size disagrees with its entry count",
                                {"entries": n, "size": len(buf)})
        lengths = {}
        for i in range(n):
            s, length = _PAIR.unpack_from(buf, 4 + i * _PAIR.size)
            if not 1 <= length <= MAX_CODE_LENGTH or s in lengths:
                raise CorruptStream(f"invalid huffman table entry ({s}, {length})", {"symbol": s, "length": length})
            lengths[s] = length
        if sum(2.0 ** -n for n in lengths.values()) > 1.0:
            raise CorruptStream("code lengths violate the Kraft inequality")
        return cls(lengths)


def code_lengths(symbols) -> Dict[int, int]:
    freq = Counter(int(s) for s in np.asarray(symbols, dtype=np.int64).reshape(-1))
    if not freq:
        return {}
    if len(freq) == 1:
        return {next(iter(freq)): 1}
    lengths = {s: 0 for s in freq}
    # (weight, tiebreak, leaves)
    heap: List[Tuple[int, int, List[int]]] = [(w, i, [s]) for i, (s, w) in enumerate(sorted(freq.items()))]
    heapq.heapify(heap)
    order = len(heap)
    while len(heap) > 1:
        w1, _, a = heapq.heappop(heap)
        w2, _, b = heapq.heappop(heap)
        for s in a + b:
            lengths[s] += 1
        heapq.heappush(heap, (w1 + w2, order, a + b))
        order += 1
    return lengths


def canonical_codes(lengths: Dict[int, int]) -> Dict[int, Tuple[int, int]]:
    """symbol -> (codeword, length) in canonical (length, symbol) order"""
    first = _first_codes(lengths)
    codes = {}
    for s, n in sorted(lengths.items(), key=lambda kv: (kv[1], kv[0])):
        codes[s] = (first[n], n)
        first[n] += 1
    return codes


def _first_codes(lengths: Dict[int, int]) -> Dict[int, int]:
    counts = Counter(lengths.values())
    first, code = {}, 0
    for n in range(1, max(counts, default=0) + 1):
        code = (code + counts.get(n - 1, 0)) << 1
        first[n] = code
    return first


def build_table(symbols) -> HuffmanTable:
    return HuffmanTable(code_lengths(symbols))


def huffman_encode(symbols) -> Tuple[bytes, HuffmanTable]:
    symbols = np.asarray(symbols, dtype=np.int64).reshape(-1)
    table = build_table(symbols)
    if symbols.size == 0:
        return b"", table
    alphabet, inverse = np.unique(symbols, return_inverse=True)
    code_arr = np.array([table.codes[int(s)][0] for s in alphabet], dtype=np.uint64)[inverse]
    len_arr = np.array([table.codes[int(s)][1] for s in alphabet], dtype=np.int64)[inverse]
    ends = np.cumsum(len_arr)
    starts = ends - len_arr
    bits = np.zeros(int(ends[-1]), dtype=np.uint8)
    for j in range(int(len_arr.max())):
        live = len_arr > j
        shift = (len_arr[live] - 1 - j).astype(np.uint64)
        bits[starts[live] + j] = ((code_arr[live] >> shift) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits, bitorder="big").tobytes(), table


def huffman_decode(bitstream: bytes, table: HuffmanTable, count: int) -> np.ndarray:
    if count == 0:
        if bitstream:
            raise CorruptStream("trailing bytes after an empty symbol stream", {"size": len(bitstream)})
        return np.zeros(0, dtype=np.int64)
    if not table.lengths:
        raise CorruptStream("empty huffman table for a non-empty stream", {"count": count})
    counts = Counter(table.lengths.values())
    first = _first_codes(table.lengths)
    ordered = [s for s, _ in sorted(table.lengths.items(), key=lambda kv: (kv[1], kv[0]))]
    offset, acc = {}, 0
    for n in range(1, table.max_length + 1):
        offset[n] = acc
        acc += counts.get(n, 0)
    bits = np.unpackbits(np.frombuffer(bitstream, dtype=np.uint8), bitorder="big").tolist()
    nbits, max_len = len(bits), table.max_length
    if count > nbits:
        raise CorruptStream("symbol count exceeds the available bits", {"count": count, "bits": nbits})
    out = np.empty(count, dtype=np.int64)
    pos = 0
    for i in range(count):
        code = length = 0
        while True:
            if pos >= nbits:
                raise CorruptStream("bitstream ended before all symbols were decoded",
                                    {"decoded": i, "count": count})
            code = (code << 1) | bits[pos]
            pos += 1
            length += 1
            if length > max_len:
                raise CorruptStream("bit pattern matches no codeword", {"position": pos})
            k = code - first[length]
            if 0 <= k < counts.get(length, 0):
                out[i] = ordered[offset[length] + k]
                break
    if (pos + 7) // 8 != len(bitstream) or any(bits[pos:]):
        raise CorruptStream("unexpected data after the final codeword", {"used_bits": pos, "size": len(bitstream)})
    return out


# ---------- stream framing ----------
def encode_symbol_stream(symbols) -> Tuple[bytes, bytes]:
    """(payload, table bytes) for one quantized stream"""
    symbols = np.asarray(symbols, dtype=np.int64).reshape(-1)
    bitstream, table = huffman_encode(symbols)
    return struct.pack("<Q", symbols.size) + bitstream, table.serialize()


def decode_symbol_stream(payload: bytes, table_bytes: bytes) -> np.ndarray:
    if len(payload) < 8:
        raise CorruptStream("symbol stream shorter than its count field", {"size": len(payload)})
    (count,) = struct.unpack_from("<Q", payload)
    return huffman_decode(payload[8:], HuffmanTable.deserialize(table_bytes), count)
