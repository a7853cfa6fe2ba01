#!/usr/bin/env python3
"""
Exception hierarchy for the compressor.
Every error carries a `details` dict so the CLI can emit a structured record.
"""

from typing import Any, Dict, Optional


class CompressionError(RuntimeError):
    """Base class for every error raised by the package"""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = dict(details or {})

    def to_record(self) -> Dict[str, Any]:
        return {"status": "error", "error": type(self).__name__, "message": str(self), **self.details}


class ConfigError(CompressionError, ValueError):
    pass


# ---------- tensor-core ----------
class RankMismatch(CompressionError, ValueError):
    pass


class MissingBlock(CompressionError, LookupError):
    pass


# ---------- nn ----------
class ShapeMismatch(CompressionError, ValueError):
    pass


class NonFiniteValue(CompressionError, ArithmeticError):
    pass


class Diverged(CompressionError):
    pass


# ---------- gae ----------
class NumericalFailure(CompressionError, ArithmeticError):
    pass


class BinTooCoarse(CompressionError):
    pass


class GuaranteeViolation(CompressionError, AssertionError):
    pass


# ---------- codec ----------
class QuantizationOverflow(CompressionError, OverflowError):
    pass


class CorruptStream(CompressionError, ValueError):
    pass


class LengthOverflow(CompressionError, ValueError):
    pass


class CorruptPayload(CompressionError, ValueError):
    pass


# ---------- archive ----------
class VersionMismatch(CompressionError, ValueError):
    pass


class TruncatedFile(CompressionError, ValueError):
    pass


class ChecksumFail(CompressionError, ValueError):
    pass


# ---------- metrics ----------
class ZeroRange(CompressionError, ValueError):
    pass


def require(cond: bool, exc: type, msg: str, **details: Any) -> None:
    if not cond:
        raise exc(msg, details)
