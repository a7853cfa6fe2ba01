#!/usr/bin/env python3
"""Uniform mid-tread quantizer: symbol = round(v / bin), ties away from zero"""

from dataclasses import dataclass

import numpy as np

from src.errors import ConfigError, NonFiniteValue, QuantizationOverflow, require

_INT64_LIMIT = float(2 ** 63)


@dataclass
class QuantizedStream:
    bin: float
    symbols: np.ndarray
    count: int

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols, dtype=np.int64).reshape(-1)


def quantize(values: np.ndarray, bin: float) -> QuantizedStream:
    require(bin > 0 and np.isfinite(bin), ConfigError, f"bin must be positive, got {bin}")
    v = np.asarray(values, dtype=np.float64).reshape(-1)
    scaled = v / bin
    if not np.isfinite(scaled).all():
        raise NonFiniteValue("cannot quantize non-finite values", {"bin": bin})
    mag = np.floor(np.abs(scaled) + 0.5)
    if mag.size and mag.max() >= _INT64_LIMIT:
        raise QuantizationOverflow(f"|v/bin| exceeds the 63-bit symbol range (bin={bin})",
                                   {"bin": bin, "max_abs": float(np.abs(v).max())})
    symbols = (np.sign(scaled) * mag).astype(np.int64)
    return QuantizedStream(float(bin), symbols, int(v.size))


def dequantize(stream: QuantizedStream) -> np.ndarray:
    return stream.symbols.astype(np.float64) * stream.bin
