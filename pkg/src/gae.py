#!/usr/bin/env python3
"""
Error-bound guarantee post-processing.

A PCA basis U is fitted on every block residual x - x^R. For a block whose
residual norm exceeds tau, the residual is projected (c = U^T r), coefficients
are taken in decreasing |c| order, quantized with a uniform bin, and the
smallest top-M set whose corrected block x^G = x^R + U_sel c_q satisfies
||x - x^G||_2 <= tau is kept. The error is re-measured on the 32-bit x^G the
decoder will produce, with the 32-bit basis that is stored, so the bound holds
for the decompressed data and not only in exact arithmetic.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from sklearn.utils.extmath import svd_flip

from src.codec.quantize import quantize
from src.errors import BinTooCoarse, ConfigError, GuaranteeViolation, NumericalFailure, ShapeMismatch, require
from src.parallel import CHUNK, run_tasks

logger = logging.getLogger(__name__)

# Relative slack between the closed-form error prediction and the error measured
# after 32-bit rounding of U and x^G.
_ROUNDING_SLACK = 2.0 ** -22


@dataclass
class PcaBasis:
    U: np.ndarray
    eigenvalues: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.U.shape[0])

    def as_float32(self) -> "PcaBasis":
        return PcaBasis(self.U.astype(np.float32).astype(np.float64), self.eigenvalues.copy())

    def truncated(self, columns: int) -> "PcaBasis":
        """Leading columns only; blocks never select beyond them"""
        return PcaBasis(self.U[:, :columns].copy(), self.eigenvalues[:columns].copy())


@dataclass
class CorrectionRecord:
    block_id: int
    indices: np.ndarray  # ascending basis column ids
    symbols: np.ndarray  # quantized coefficients aligned with indices
    bin: float
    error: float = 0.0

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        self.symbols = np.asarray(self.symbols, dtype=np.int64).reshape(-1)
        require(self.indices.size == self.symbols.size, ShapeMismatch,
                "one coefficient per selected index", indices=int(self.indices.size), symbols=int(self.symbols.size))

    @property
    def count(self) -> int:
        return int(self.indices.size)

    @property
    def prefix_length(self) -> int:
        return int(self.indices[-1]) + 1 if self.count else 0

    def mask(self, dim: int) -> np.ndarray:
        m = np.zeros(dim, dtype=bool)
        m[self.indices] = True
        return m


@dataclass
class GuaranteeReport:
    tau: float
    bin: float
    errors: np.ndarray
    corrected_blocks: int
    total_coefficients: int
    initial_errors: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def max_error(self) -> float:
        return float(self.errors.max()) if self.errors.size else 0.0

    def to_dict(self) -> dict:
        return {"tau": self.tau, "bin": self.bin, "blocks": int(self.errors.size),
                "corrected_blocks": self.corrected_blocks, "total_coefficients": self.total_coefficients,
                "max_error": self.max_error,
                "max_initial_error": float(self.initial_errors.max()) if self.initial_errors.size else 0.0}


# ---------- PCA ----------
def fit_pca(residuals: np.ndarray) -> PcaBasis:
    """
    Eigen-decomposition of the uncentered second-moment matrix R^T R / N.
    Columns are sorted by descending eigenvalue with deterministic signs; an
    all-zero input yields the identity.
    """
    R = np.asarray(residuals, dtype=np.float64)
    require(R.ndim == 2 and R.shape[0] >= 1 and R.shape[1] >= 1, ShapeMismatch,
            "fit_pca needs an N x D residual matrix with N, D >= 1", shape=list(R.shape))
    D = R.shape[1]
    C = R.T @ R / R.shape[0]
    if not np.any(C):
        return PcaBasis(np.eye(D), np.zeros(D))
    try:
        w, V = np.linalg.eigh(C)
    except np.linalg.LinAlgError as e:
        raise NumericalFailure(f"eigensolver failed on the {D}x{D} residual moment matrix", {"dim": D}) from e
    order = np.argsort(-w, kind="stable")
    w = np.clip(w[order], 0.0, None)
    V, _ = svd_flip(np.ascontiguousarray(V[:, order]), np.ascontiguousarray(V[:, order].T))
    return PcaBasis(V, w)


def project(residual: np.ndarray, U: np.ndarray) -> np.ndarray:
    r = np.asarray(residual, dtype=np.float64)
    require(r.shape[-1] == U.shape[0], ShapeMismatch, f"residual length {r.shape[-1]} vs basis dim {U.shape[0]}")
    return r @ U


def apply_correction(x_r: np.ndarray, U: np.ndarray, indices: np.ndarray, symbols: np.ndarray,
                     bin: float) -> np.ndarray:
    """x^G = f32(x^R + U[:, indices] (symbols * bin)); shared by encoder and decoder"""
    base = np.asarray(x_r, dtype=np.float32).astype(np.float64)
    if len(indices) == 0:
        return base.astype(np.float32)
    coef = np.asarray(symbols, dtype=np.int64).astype(np.float64) * bin
    return (base + U[:, np.asarray(indices, dtype=np.int64)] @ coef).astype(np.float32)


# ---------- per-block guarantee ----------
def guarantee_block(x: np.ndarray, x_r: np.ndarray, U: np.ndarray, tau: float, bin: float,
                    block_id: int = 0) -> Tuple[np.ndarray, CorrectionRecord]:
    """
    Smallest greedy top-M correction with ||x - x^G||_2 <= tau. Returns the
    32-bit corrected block and its record (empty when x^R already qualifies).
    """
    require(tau > 0, ConfigError, "tau must be positive", tau=tau)
    x = np.asarray(x, dtype=np.float32).astype(np.float64)
    base = np.asarray(x_r, dtype=np.float32)
    r = x - base.astype(np.float64)
    delta = float(np.linalg.norm(r))
    if delta <= tau:
        return base.copy(), CorrectionRecord(block_id, [], [], bin, delta)

    D = U.shape[0]
    c = r @ U
    symbols = quantize(c, bin).symbols
    order = np.argsort(-(c * c), kind="stable")
    c2 = (c * c)[order]
    qerr = (c - symbols * bin)[order] ** 2
    # predicted squared error after keeping the first M: tail of c^2 + quantization error of the head
    tail = np.concatenate([np.cumsum(c2[::-1])[::-1], [0.0]])
    head = np.concatenate([[0.0], np.cumsum(qerr)])
    predicted = np.sqrt(np.maximum(tail + head, 0.0))
    slack = _ROUNDING_SLACK * (np.sqrt(D) * delta + float(np.linalg.norm(x)) + delta)
    below = np.flatnonzero(predicted[1:] <= tau + slack)
    start = int(below[0]) + 1 if below.size else U.shape[1]

    for M in range(start, U.shape[1] + 1):
        sel = np.sort(order[:M])
        x_g = apply_correction(base, U, sel, symbols[sel], bin)
        err = float(np.linalg.norm(x - x_g.astype(np.float64)))
        if err <= tau:
            return x_g, CorrectionRecord(block_id, sel, symbols[sel], bin, err)
    raise BinTooCoarse(f"block {block_id}: all {U.shape[1]} coefficients leave error above tau",
                       {"block_id": block_id, "tau": tau, "bin": bin})


def default_bin(tau: float, dim: int) -> float:
    return float(tau / np.sqrt(dim))


def guarantee_dataset(blocks: np.ndarray, recon: np.ndarray, tau: float, bin: Optional[float] = None,
                      basis: Optional[PcaBasis] = None, workers: Optional[int] = None,
                      block_ids: Optional[Sequence[int]] = None
                      ) -> Tuple[np.ndarray, List[CorrectionRecord], PcaBasis, GuaranteeReport]:
    """
    Run the guarantee over an N x D block matrix. Returns corrected 32-bit
    blocks, records of corrected blocks sorted by block id, the 32-bit basis
    (full width) and the report. max error <= tau is asserted.
    """
    X = np.asarray(blocks, dtype=np.float32)
    XR = np.asarray(recon, dtype=np.float32)
    require(X.shape == XR.shape and X.ndim == 2, ShapeMismatch,
            "original and reconstructed block matrices must match", original=list(X.shape), recon=list(XR.shape))
    require(tau > 0, ConfigError, "tau must be positive", tau=tau)
    N, D = X.shape
    bin = default_bin(tau, D) if bin is None else float(bin)
    ids = np.arange(N) if block_ids is None else np.asarray(block_ids, dtype=np.int64)
    if basis is None:
        basis = fit_pca(X.astype(np.float64) - XR.astype(np.float64)).as_float32()
    U = basis.U

    def run(lo: int, hi: int):
        return [guarantee_block(X[i], XR[i], U, tau, bin, int(ids[i])) for i in range(lo, hi)]

    tasks = [lambda lo=lo: run(lo, min(lo + CHUNK, N)) for lo in range(0, N, CHUNK)]
    results = [item for chunk in run_tasks(tasks, workers) for item in chunk]
    XG = np.stack([xg for xg, _ in results]) if results else np.zeros((0, D), dtype=np.float32)
    errors = np.array([rec.error for _, rec in results], dtype=np.float64)
    initial = np.linalg.norm(X.astype(np.float64) - XR.astype(np.float64), axis=1) if N else np.zeros(0)
    records = sorted((rec for _, rec in results if rec.count), key=lambda rec: rec.block_id)
    report = GuaranteeReport(float(tau), bin, errors, len(records), int(sum(r.count for r in records)), initial)
    if report.max_error > tau:
        raise GuaranteeViolation(f"max block error {report.max_error} exceeds tau {tau}",
                                 {"max_error": report.max_error, "tau": tau})
    logger.info("guarantee tau=%.3e: %d/%d blocks corrected, %d coefficients, max error %.3e",
                tau, report.corrected_blocks, N, report.total_coefficients, report.max_error)
    return XG, records, basis, report


def apply_records(recon: np.ndarray, records: Sequence[CorrectionRecord], U: np.ndarray,
                  block_ids: Optional[Sequence[int]] = None) -> np.ndarray:
    """Decoder side: replay stored corrections onto x^R blocks"""
    XG = np.asarray(recon, dtype=np.float32).copy()
    row_of = {int(b): i for i, b in enumerate(block_ids)} if block_ids is not None else None
    for rec in records:
        row = row_of[rec.block_id] if row_of is not None else rec.block_id
        XG[row] = apply_correction(XG[row], U, rec.indices, rec.symbols, rec.bin)
    return XG
