from src.codec.huffman import (HuffmanTable, build_table, decode_symbol_stream, encode_symbol_stream,
                               huffman_decode, huffman_encode)
from src.codec.indices import (IndexBitmask, decode_indices, encode_indices, mask_from_indices,
                               pack_index_payload, unpack_index_payload)
from src.codec.lossless import BACKENDS, lossless_pack, lossless_unpack
from src.codec.quantize import QuantizedStream, dequantize, quantize

__all__ = [
    "QuantizedStream", "quantize", "dequantize",
    "HuffmanTable", "build_table", "huffman_encode", "huffman_decode",
    "encode_symbol_stream", "decode_symbol_stream",
    "IndexBitmask", "encode_indices", "decode_indices", "mask_from_indices",
    "pack_index_payload", "unpack_index_payload",
    "BACKENDS", "lossless_pack", "lossless_unpack",
]
