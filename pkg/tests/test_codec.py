#!/usr/bin/env python3
import struct

import numpy as np
import pytest

from src.codec import (BACKENDS, HuffmanTable, decode_indices, decode_symbol_stream, dequantize, encode_indices,
                       encode_symbol_stream, huffman_decode, huffman_encode, lossless_pack, lossless_unpack,
                       mask_from_indices, pack_index_payload, quantize, unpack_index_payload)
from src.codec.huffman import code_lengths
from src.codec.lossless import backend_of
from src.errors import ConfigError, CorruptPayload, CorruptStream, LengthOverflow, NonFiniteValue, QuantizationOverflow


# ---------- quantizer ----------
def test_quantization_error_is_at_most_half_a_bin(rng):
    for _ in range(200):
        bin = float(10 ** rng.uniform(-4, 1))
        values = rng.normal(scale=10 ** rng.uniform(-3, 3), size=64)
        q = quantize(values, bin)
        assert np.abs(values - q.symbols * bin).max() <= bin / 2 * (1 + 1e-12)


@pytest.mark.slow
def test_quantization_error_many_cases():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        bin = float(10 ** rng.uniform(-4, 1))
        values = rng.normal(scale=10 ** rng.uniform(-3, 3), size=int(rng.integers(1, 32)))
        q = quantize(values, bin)
        assert np.abs(values - dequantize(q)).max() <= bin / 2 * (1 + 1e-12)


def test_quantizer_ties_round_away_from_zero():
    assert quantize([0.5, -0.5, 1.5, -2.5], 1.0).symbols.tolist() == [1, -1, 2, -3]


def test_quantizer_rejects_bad_bin():
    with pytest.raises(ConfigError):
        quantize([1.0], 0.0)


def test_quantizer_rejects_non_finite():
    with pytest.raises(NonFiniteValue):
        quantize([1.0, np.inf], 0.1)


def test_quantizer_overflow():
    with pytest.raises(QuantizationOverflow):
        quantize([1e30], 1e-3)


# ---------- huffman ----------
def _symbols(rng, n):
    return np.round(rng.laplace(scale=rng.uniform(0.5, 20), size=n)).astype(np.int64)


def test_huffman_identity_on_random_streams(rng):
    for _ in range(100):
        symbols = _symbols(rng, int(rng.integers(1, 400)))
        payload, table = encode_symbol_stream(symbols)
        assert np.array_equal(decode_symbol_stream(payload, table), symbols)


def test_huffman_code_lengths_are_complete(rng):
    symbols = _symbols(rng, 1000)
    lengths = code_lengths(symbols)
    assert sum(2.0 ** -n for n in lengths.values()) == pytest.approx(1.0)
    bitstream, table = huffman_encode(symbols)
    counts = {s: int((symbols == s).sum()) for s in lengths}
    assert len(bitstream) == (sum(counts[s] * table.lengths[s] for s in counts) + 7) // 8


def test_frequent_symbols_get_shorter_codes():
    symbols = [0] * 50 + [1] * 20 + [2] * 5 + [3]
    lengths = code_lengths(symbols)
    assert lengths[0] <= lengths[1] <= lengths[2] <= lengths[3]


def test_single_symbol_stream_uses_one_bit():
    bitstream, table = huffman_encode([7] * 9)
    assert table.lengths == {7: 1}
    assert len(bitstream) == 2
    assert huffman_decode(bitstream, table, 9).tolist() == [7] * 9


def test_empty_stream():
    payload, table = encode_symbol_stream([])
    assert decode_symbol_stream(payload, table).size == 0


def test_table_serialization_is_sorted_and_canonical():
    table = HuffmanTable({5: 2, -3: 1, 9: 2})
    again = HuffmanTable.deserialize(table.serialize())
    assert again.codes == table.codes
    assert table.codes[-3] == (0, 1)
    assert table.codes[5] == (0b10, 2) and table.codes[9] == (0b11, 2)


def test_table_violating_kraft_is_rejected():
    buf = struct.pack("<I", 3) + b"".join(struct.pack("<qB", s, 1) for s in (1, 2, 3))
    with pytest.raises(CorruptStream):
        HuffmanTable.deserialize(buf)


def test_truncated_table_is_rejected():
    _, table = encode_symbol_stream([1, 2, 3, 3])
    with pytest.raises(CorruptStream):
        HuffmanTable.deserialize(table[:-2])


def test_truncated_stream_is_rejected(rng):
    payload, table = encode_symbol_stream(_symbols(rng, 300))
    with pytest.raises(CorruptStream):
        decode_symbol_stream(payload[:-4], table)


def test_trailing_garbage_is_rejected(rng):
    payload, table = encode_symbol_stream(_symbols(rng, 50))
    with pytest.raises(CorruptStream):
        decode_symbol_stream(payload + b"\xff", table)


@pytest.mark.slow
def test_huffman_identity_many_cases():
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        symbols = _symbols(rng, int(rng.integers(1, 64)))
        payload, table = encode_symbol_stream(symbols)
        assert np.array_equal(decode_symbol_stream(payload, table), symbols)


# ---------- index bitmasks ----------
def test_prefix_stops_at_last_set_bit():
    bm = encode_indices(np.array([0, 1, 0, 1, 0, 0], dtype=bool))
    assert bm.length == 4
    assert bm.prefix.tolist() == [False, True, False, True]
    assert decode_indices(bm, 6).tolist() == [False, True, False, True, False, False]


def test_empty_mask_has_zero_length():
    assert encode_indices(np.zeros(5, dtype=bool)).length == 0


def test_index_payload_round_trip(rng):
    masks = [mask_from_indices(rng.choice(16, size=int(rng.integers(0, 6)), replace=False), 16) for _ in range(30)]
    bitmasks = [encode_indices(m) for m in masks]
    back = unpack_index_payload(pack_index_payload(bitmasks), 16)
    assert [decode_indices(b, 16).tolist() for b in back] == [m.tolist() for m in masks]


@pytest.mark.slow
def test_index_payload_many_cases():
    rng = np.random.default_rng(12)
    for _ in range(10_000):
        dim = int(rng.integers(1, 40))
        masks = [mask_from_indices(rng.choice(dim, size=int(rng.integers(0, dim + 1)), replace=False), dim)
                 for _ in range(int(rng.integers(1, 4)))]
        back = unpack_index_payload(pack_index_payload([encode_indices(m) for m in masks]), dim)
        assert [decode_indices(b, dim).tolist() for b in back] == [m.tolist() for m in masks]


def test_decode_rejects_overlong_prefix():
    bm = encode_indices(np.array([0, 0, 0, 1], dtype=bool))
    with pytest.raises(LengthOverflow):
        decode_indices(bm, 3)


def test_payload_rejects_lengths_beyond_dim():
    payload = pack_index_payload([encode_indices(mask_from_indices([7], 8))])
    with pytest.raises(LengthOverflow):
        unpack_index_payload(payload, 4)


def test_payload_rejects_missing_bits():
    payload = pack_index_payload([encode_indices(mask_from_indices([1, 9], 12))])
    with pytest.raises(CorruptStream):
        unpack_index_payload(payload[:-1], 12)


# ---------- lossless backends ----------
@pytest.mark.parametrize("backend", sorted(BACKENDS))
def test_lossless_backends(backend, rng):
    data = rng.integers(0, 4, size=5000, dtype=np.uint8).tobytes()
    blob = lossless_pack(data, backend)
    assert backend_of(blob) == backend
    assert lossless_unpack(blob) == data
    assert lossless_unpack(lossless_pack(b"", backend)) == b""


def test_unknown_backend():
    with pytest.raises(ConfigError):
        lossless_pack(b"abc", "lzma")


@pytest.mark.parametrize("backend", ["zlib", "zstd"])
def test_corrupt_body(backend):
    blob = lossless_pack(b"hello world" * 20, backend)
    with pytest.raises(CorruptPayload):
        lossless_unpack(blob[:9] + b"\x00" * 16)


def test_length_mismatch_in_header():
    blob = bytearray(lossless_pack(b"abcdef", "store"))
    blob[1] = 9
    with pytest.raises(CorruptPayload):
        lossless_unpack(bytes(blob))


def test_unknown_tag():
    with pytest.raises(CorruptPayload):
        lossless_unpack(b"\x07" + bytes(8))
