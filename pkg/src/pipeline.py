#!/usr/bin/env python3
"""
End-to-end orchestration: train -> compress -> decompress -> evaluate.

The autoencoder stages run on the normalized dataset; the guarantee stage runs
on the original data with an absolute tau. Compression reconstructs x^R through
the same decode path decompression uses, so the corrections it chooses are
applied to bit-identical inputs on both sides.
"""

import logging
import struct
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import orjson
import pandas as pd

from app.config import Config, PipelineConfig
from src import bae as bae_mod
from src import hbae as hbae_mod
from src.archive import (POLICIES, Manifest, SizeLedger, compression_ratio, per_variable_ratios, read_archive,
                         write_archive, write_archive_file)
from src.bae import BaeConfig, BaeModel, bae_train
from src.codec import (IndexBitmask, QuantizedStream, decode_symbol_stream, dequantize, encode_indices,
                       encode_symbol_stream, lossless_pack, lossless_unpack, pack_index_payload, quantize,
                       unpack_index_payload)
from src.errors import (ChecksumFail, ConfigError, CorruptStream, GuaranteeViolation, LengthOverflow, TruncatedFile,
                        ZeroRange, require)
from src.gae import (CorrectionRecord, GuaranteeReport, apply_records, default_bin, guarantee_dataset)
from src.hbae import HbaeConfig, HbaeModel, hbae_train
from src.metrics import (EvalReport, max_block_error, nrmse, per_variable_nrmse,
                         relative_point_error_histogram)
from src.nn.checkpoint import digest, dump_checkpoint, load_checkpoint
from src.tensor_core import (BlockGrid, BlockSpec, Dataset, HyperBlockLayout, NormStats, group_hyper,
                             load_dataset, normalize, partition, partition_array, reassemble_array,
                             denormalize_array)

logger = logging.getLogger(__name__)


# ---------- Utilities ----------
def _ms(t0: float, t1: float) -> float:
    return round((t1 - t0) * 1000, 2)


def load_input(cfg: PipelineConfig, dataset: Optional[Dataset] = None) -> Dataset:
    if dataset is not None:
        return dataset
    require(cfg.dataset is not None, ConfigError, "no dataset given (config key 'dataset')")
    return load_dataset(cfg.dataset_path(), cfg.header_path())


def ae_spec(cfg: PipelineConfig) -> BlockSpec:
    return BlockSpec(tuple(cfg.block_shape), cfg.hyper_k, cfg.hyper_axis)


def gae_spec(cfg: PipelineConfig) -> BlockSpec:
    return BlockSpec(tuple(cfg.effective_gae_block_shape))


def hbae_config_for(cfg: PipelineConfig, block_dim: int) -> HbaeConfig:
    h = cfg.hbae
    return HbaeConfig(block_dim=block_dim, hyper_k=cfg.hyper_k, embed_dim=h.embed_dim, latent_dim=h.latent_dim,
                      hidden_dim=h.hidden_dim, d_k=h.d_k, use_attention=h.use_attention)


def bae_config_for(cfg: PipelineConfig, block_dim: int) -> BaeConfig:
    return BaeConfig(block_dim=block_dim, latent_dim=cfg.bae.latent_dim, hidden_dim=cfg.bae.hidden_dim)


@dataclass
class Prepared:
    dataset: Dataset
    normalized: Dataset
    stats: List[NormStats]
    spec: BlockSpec
    grid: BlockGrid
    layout: HyperBlockLayout

    @property
    def hyper(self) -> np.ndarray:
        return self.layout.gather(self.grid.data)


def prepare(cfg: PipelineConfig, ds: Dataset) -> Prepared:
    cfg.validate()
    spec = ae_spec(cfg)
    spec.validate(ds.shape)
    gae_spec(cfg).validate(ds.shape)
    normed, stats = normalize(ds, cfg.norm_mode, cfg.group_axis)
    grid = partition(normed, spec)
    return Prepared(ds, normed, stats, spec, grid, group_hyper(grid, spec))


def layout_for(shape: Sequence[int], spec: BlockSpec) -> HyperBlockLayout:
    n = spec.num_blocks(shape)
    return group_hyper(BlockGrid(np.empty((n, 0), dtype=np.float32), spec, shape), spec)


def gae_block_groups(shape: Sequence[int], spec: BlockSpec, group_axis: Optional[int]) -> List[np.ndarray]:
    """Block ids per guarantee group (one group unless group_axis is set)"""
    grid = spec.grid_shape(shape)
    ids = np.arange(int(np.prod(grid)), dtype=np.int64).reshape(grid)
    if group_axis is None:
        return [ids.reshape(-1)]
    return [np.sort(np.take(ids, g, axis=group_axis).reshape(-1)) for g in range(grid[group_axis])]


# ---------- Models ----------
@dataclass
class ModelPair:
    hbae: HbaeModel
    bae: BaeModel

    def checkpoints(self) -> Dict[str, bytes]:
        return {"hbae": dump_checkpoint(self.hbae, "hbae", self.hbae.checkpoint_config(), self.hbae.seed),
                "bae": dump_checkpoint(self.bae, "bae", self.bae.checkpoint_config(), self.bae.seed)}

    def save(self, run_dir: Union[str, Path]) -> Dict[str, Path]:
        run_dir = Path(run_dir)
        run_dir.mkdir(parents=True, exist_ok=True)
        paths = {}
        for kind, payload in self.checkpoints().items():
            path = run_dir / (Config.HBAE_CHECKPOINT if kind == "hbae" else Config.BAE_CHECKPOINT)
            path.write_bytes(payload)
            paths[kind] = path
        return paths

    @classmethod
    def from_checkpoints(cls, payloads: Dict[str, bytes],
                         expected: Optional[Dict[str, Dict[str, Any]]] = None) -> "ModelPair":
        for kind, payload in payloads.items():
            want = (expected or {}).get(kind, {}).get("sha256")
            if want is not None and digest(payload) != want:
                raise ChecksumFail(f"{kind} checkpoint does not match the archive", {"model": kind})
        return cls(HbaeModel.from_checkpoint(load_checkpoint(payloads["hbae"])),
                   BaeModel.from_checkpoint(load_checkpoint(payloads["bae"])))

    @classmethod
    def load(cls, run_dir: Union[str, Path], expected: Optional[Dict[str, Dict[str, Any]]] = None) -> "ModelPair":
        run_dir = Path(run_dir)
        payloads = {}
        for kind, name in (("hbae", Config.HBAE_CHECKPOINT), ("bae", Config.BAE_CHECKPOINT)):
            path = run_dir / name
            if not path.exists():
                raise TruncatedFile(f"missing {kind} checkpoint {path}", {"path": str(path)})
            payloads[kind] = path.read_bytes()
        return cls.from_checkpoints(payloads, expected)


@dataclass
class TrainResult:
    models: ModelPair
    hbae_losses: List[float]
    bae_losses: List[float]
    paths: Dict[str, Path] = field(default_factory=dict)
    timings_ms: Dict[str, float] = field(default_factory=dict)

    def loss_frame(self) -> pd.DataFrame:
        rows = [{"stage": "hbae", "epoch": i + 1, "loss": v} for i, v in enumerate(self.hbae_losses)]
        rows += [{"stage": "bae", "epoch": i + 1, "loss": v} for i, v in enumerate(self.bae_losses)]
        return pd.DataFrame(rows, columns=["stage", "epoch", "loss"])


def hbae_roundtrip(prep: Prepared, model: HbaeModel, bin: float,
                   workers: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Quantized HBAE symbols (H, L_h) and the per-block reconstruction y (N, D) decoded from them"""
    latents = hbae_mod.encode_all(prep.hyper, model, workers)
    symbols = quantize(latents, bin).symbols.reshape(latents.shape)
    return symbols, decode_hbae(symbols, prep.layout, model, bin, workers)


def decode_hbae(symbols: np.ndarray, layout: HyperBlockLayout, model: HbaeModel, bin: float,
                workers: Optional[int] = None) -> np.ndarray:
    latents = dequantize(QuantizedStream(bin, symbols, symbols.size)).reshape(len(layout), model.config.latent_dim)
    return layout.scatter(hbae_mod.decode_all(latents, model, workers))


def decode_ae(h_symbols: np.ndarray, b_symbols: np.ndarray, layout: HyperBlockLayout, models: ModelPair,
              hbae_bin: float, bae_bin: float, workers: Optional[int] = None) -> np.ndarray:
    """Normalized x^R blocks (N, D) from the two quantized latent streams"""
    y = decode_hbae(h_symbols, layout, models.hbae, hbae_bin, workers)
    lat_b = dequantize(QuantizedStream(bae_bin, b_symbols, b_symbols.size)).reshape(y.shape[0], -1)
    return bae_mod.decode_all(lat_b, y, models.bae, workers)


def to_original(blocks: np.ndarray, spec: BlockSpec, shape: Sequence[int], stats: Sequence[NormStats]) -> np.ndarray:
    return denormalize_array(reassemble_array(blocks, spec, shape), stats).astype(np.float32)


# ---------- Train ----------
def train(cfg: PipelineConfig, dataset: Optional[Dataset] = None, save: bool = True) -> TrainResult:
    """HBAE first, then BAE on the quantized HBAE reconstruction"""
    t0 = time.perf_counter()
    prep = prepare(cfg, load_input(cfg, dataset))
    D = prep.spec.block_dim
    t1 = time.perf_counter()
    hbae, h_losses = hbae_train(prep.hyper, hbae_config_for(cfg, D), cfg.hbae.epochs, cfg.hbae.batch,
                                cfg.seed, cfg.hbae.lr)
    t2 = time.perf_counter()
    _, y = hbae_roundtrip(prep, hbae, cfg.hbae_bin, cfg.workers)
    bae, b_losses = bae_train(prep.grid.data, y, bae_config_for(cfg, D), cfg.bae.epochs, cfg.bae.batch,
                              cfg.seed, cfg.bae.lr)
    t3 = time.perf_counter()
    result = TrainResult(ModelPair(hbae, bae), h_losses, b_losses)
    if save:
        run_dir = cfg.run_path()
        result.paths = result.models.save(run_dir)
        result.paths["losses"] = run_dir / "losses.csv"
        result.loss_frame().to_csv(result.paths["losses"], index=False)
        logger.info("saved checkpoints and loss curves to %s", run_dir)
    result.timings_ms = {"prepare": _ms(t0, t1), "hbae_train": _ms(t1, t2), "bae_train": _ms(t2, t3),
                         "total": _ms(t0, time.perf_counter())}
    return result


# ---------- Basis serialization ----------
def pack_basis(U: np.ndarray) -> bytes:
    """u32 D | u32 m | D x m float32 row-major"""
    D, m = U.shape
    return struct.pack("<II", D, m) + np.ascontiguousarray(U, dtype="<f4").tobytes()


def unpack_basis(buf: bytes) -> np.ndarray:
    if len(buf) < 8:
        raise TruncatedFile("basis section shorter than its header", {"size": len(buf)})
    D, m = struct.unpack_from("<II", buf)
    if len(buf) != 8 + 4 * D * m:
        raise TruncatedFile("basis section size disagrees with its shape", {"dim": D, "columns": m})
    return np.frombuffer(buf, dtype="<f4", offset=8).astype(np.float64).reshape(D, m)


# ---------- Compress ----------
@dataclass
class CompressResult:
    archive: bytes
    manifest: Manifest
    ledger: SizeLedger
    report: EvalReport
    reconstruction: Dataset
    records: List[List[CorrectionRecord]]
    guarantees: List[GuaranteeReport]
    path: Optional[Path] = None

    @property
    def stored_coefficients(self) -> int:
        return sum(g.total_coefficients for g in self.guarantees)


def _config_echo(cfg: PipelineConfig) -> Dict[str, Any]:
    echo = cfg.to_dict()
    echo.pop("workers", None)
    return echo


def compress(cfg: PipelineConfig, dataset: Optional[Dataset] = None, models: Optional[ModelPair] = None,
             write: bool = True) -> CompressResult:
    t0 = time.perf_counter()
    ds = load_input(cfg, dataset)
    prep = prepare(cfg, ds)
    models = models or ModelPair.load(cfg.run_path())
    workers = cfg.workers
    require(models.hbae.config.block_dim == prep.spec.block_dim and models.hbae.config.hyper_k == cfg.hyper_k,
            ConfigError, "trained models do not match the configured blocking",
            model_block_dim=models.hbae.config.block_dim, block_dim=prep.spec.block_dim)
    t1 = time.perf_counter()

    h_symbols, y = hbae_roundtrip(prep, models.hbae, cfg.hbae_bin, workers)
    b_latents = bae_mod.encode_all(prep.grid.data, y, models.bae, workers)
    b_symbols = quantize(b_latents, cfg.bae_bin).symbols.reshape(b_latents.shape)
    t2 = time.perf_counter()

    xr_blocks = decode_ae(h_symbols, b_symbols, prep.layout, models, cfg.hbae_bin, cfg.bae_bin, workers)
    recon_r = to_original(xr_blocks, prep.spec, ds.shape, prep.stats)
    t3 = time.perf_counter()

    gspec = gae_spec(cfg)
    X = partition_array(ds.values, gspec)
    XR = partition_array(recon_r, gspec)
    XG = XR.copy()
    groups = gae_block_groups(ds.shape, gspec, cfg.group_axis)
    all_records, guarantees, group_meta, sections_gae = [], [], [], {}
    for g, ids in enumerate(groups):
        tau = cfg.tau_for_group(g)
        bin = cfg.gae_bin if cfg.gae_bin is not None else default_bin(tau, gspec.block_dim)
        xg, records, basis, report = guarantee_dataset(X[ids], XR[ids], tau, bin, workers=workers, block_ids=ids)
        XG[ids] = xg
        columns = max((r.prefix_length for r in records), default=0)
        masks = {r.block_id: encode_indices(r.mask(gspec.block_dim)) for r in records}
        bitmasks = [masks.get(int(b), IndexBitmask(np.zeros(0, dtype=bool), 0)) for b in ids]
        coef_payload, coef_table = encode_symbol_stream(
            np.concatenate([r.symbols for r in records]) if records else np.zeros(0, dtype=np.int64))
        sections_gae[f"pca_basis.g{g}"] = pack_basis(basis.U[:, :columns])
        sections_gae[f"gae_coefficients.g{g}"] = lossless_pack(coef_payload, cfg.backend)
        sections_gae[f"gae_indices.g{g}"] = lossless_pack(pack_index_payload(bitmasks), cfg.backend)
        sections_gae[f"tables.gae.g{g}"] = coef_table
        group_meta.append({"group": g, "tau": tau, "bin": float(bin), "blocks": int(len(ids)),
                           "basis_columns": columns, **report.to_dict()})
        all_records.append(records)
        guarantees.append(report)
    recon_g = reassemble_array(XG, gspec, ds.shape)
    t4 = time.perf_counter()

    max_err = max((g.max_error for g in guarantees), default=0.0)
    taus = np.concatenate([np.full(len(ids), cfg.tau_for_group(g)) for g, ids in enumerate(groups)])
    if any(g.max_error > g.tau for g in guarantees):
        raise GuaranteeViolation("a block exceeds its error bound", {"max_error": max_err})

    checkpoints = models.checkpoints()
    model_meta = {k: {"sha256": digest(v), "bytes": len(v), "embedded": cfg.embed_models}
                  for k, v in checkpoints.items()}
    h_payload, h_table = encode_symbol_stream(h_symbols)
    b_payload, b_table = encode_symbol_stream(b_symbols)
    sections: Dict[str, bytes] = {"hbae_latents": lossless_pack(h_payload, cfg.backend),
                                  "bae_latents": lossless_pack(b_payload, cfg.backend),
                                  "tables.hbae": h_table, "tables.bae": b_table, **sections_gae}
    if cfg.embed_models:
        sections["model_weights.hbae"] = checkpoints["hbae"]
        sections["model_weights.bae"] = checkpoints["bae"]
    manifest = Manifest(
        dataset={"shape": list(ds.shape), "axis_roles": list(ds.axis_roles)},
        ae_spec=prep.spec.to_dict(),
        gae_spec={**gspec.to_dict(), "group_axis": cfg.group_axis},
        norm_stats=[s.to_dict() for s in prep.stats],
        config={"pipeline": _config_echo(cfg), "hbae": models.hbae.checkpoint_config(),
                "bae": models.bae.checkpoint_config(), "bins": {"hbae": cfg.hbae_bin, "bae": cfg.bae_bin},
                "gae": group_meta, "num_groups": len(groups), "seed": cfg.seed, "models": model_meta,
                "pad": {"ae": prep.grid.pad_descriptor(),
                        "hyper_pad_counts": int(prep.layout.pad_counts.sum())}},
        backend=cfg.backend)
    payload = write_archive(manifest, sections)
    external = 0 if cfg.embed_models else sum(len(v) for v in checkpoints.values())
    ledger = SizeLedger.from_manifest(manifest, len(payload), external)
    t5 = time.perf_counter()

    timings = {"prepare": _ms(t0, t1), "encode": _ms(t1, t2), "decode_ae": _ms(t2, t3), "guarantee": _ms(t3, t4),
               "archive": _ms(t4, t5), "total": _ms(t0, t5)}
    report = evaluate(ds, recon_g, cfg, ledger=ledger, max_error=max_err, taus=taus, timings_ms=timings)
    report.extra.update({"stored_coefficients": int(sum(g.total_coefficients for g in guarantees)),
                         "corrected_blocks": int(sum(g.corrected_blocks for g in guarantees)),
                         "archive_bytes": len(payload), "ledger": ledger.to_dict(),
                         "ae_nrmse": _safe_nrmse(ds.values, recon_r)})
    result = CompressResult(payload, manifest, ledger, report, Dataset(recon_g, ds.axis_roles), all_records,
                            guarantees)
    if write:
        run_dir = cfg.run_path()
        result.path = write_archive_file(run_dir / Config.ARCHIVE_NAME, payload)
        report.save(run_dir / Config.REPORT_NAME)
    logger.info("compressed %d values to %d bytes (ratio %.2f, nrmse %s)", ds.size, len(payload),
                report.ratios[cfg.policy], report.nrmse)
    return result


def _safe_nrmse(a: np.ndarray, b: np.ndarray) -> Optional[float]:
    try:
        return nrmse(a, b)
    except ZeroRange:
        logger.warning("dataset has zero range; NRMSE undefined")
        return None


# ---------- Evaluate ----------
def evaluate(original: Union[Dataset, np.ndarray], recon: Union[Dataset, np.ndarray], cfg: PipelineConfig,
             ledger: Optional[SizeLedger] = None, max_error: Optional[float] = None,
             taus: Optional[np.ndarray] = None, timings_ms: Optional[Dict[str, float]] = None,
             bins: int = 50) -> EvalReport:
    """
    Quality report for a reconstruction. Ratios are present only when a
    ledger is given; the derived NRMSE bound only when per-block taus are.
    """
    a = np.asarray(getattr(original, "values", original), dtype=np.float32)
    b = np.asarray(getattr(recon, "values", recon), dtype=np.float32)
    gspec = gae_spec(cfg)
    score = _safe_nrmse(a, b)
    rng = float(a.max() - a.min()) if a.size else 0.0
    per_var, hist = [], None
    if score is not None:
        hist = relative_point_error_histogram(a, b, bins)
        try:
            per_var = per_variable_nrmse(a, b, cfg.group_axis)
        except ZeroRange:
            logger.warning("a variable has zero range; per-variable NRMSE skipped")
    report = EvalReport(
        nrmse=score, per_variable_nrmse=per_var,
        max_block_error=max_error if max_error is not None else max_block_error(a, b, gspec),
        histogram=hist, tau=cfg.tau, timings_ms=dict(timings_ms or {}))
    if taus is not None and rng > 0:
        report.nrmse_bound = float(np.sqrt(np.sum(np.square(taus)) / a.size) / rng)
        if score is not None and score > report.nrmse_bound:
            raise GuaranteeViolation(f"NRMSE {score} exceeds the derived bound {report.nrmse_bound}",
                                     {"nrmse": score, "bound": report.nrmse_bound})
    if ledger is not None:
        report.ratios = {p: compression_ratio(a.size * 4, ledger, p) for p in POLICIES}
        report.per_variable_ratios = per_variable_ratios(a.size * 4, ledger)
    return report


# ---------- Decompress ----------
def decompress(archive: Union[bytes, str, Path], models: Optional[ModelPair] = None,
               model_dir: Optional[Union[str, Path]] = None, workers: Optional[int] = None) -> Dataset:
    """Rebuild Omega^G from the archive alone (plus checkpoints when they are not embedded)"""
    buf = archive if isinstance(archive, (bytes, bytearray)) else Path(archive).read_bytes()
    manifest, sections = read_archive(buf)
    cfgd = manifest.config
    shape = tuple(manifest.dataset["shape"])
    if models is None:
        if "model_weights.hbae" in sections:
            models = ModelPair.from_checkpoints({"hbae": sections["model_weights.hbae"],
                                                 "bae": sections["model_weights.bae"]}, cfgd["models"])
        else:
            run_dir = model_dir or PipelineConfig(**cfgd["pipeline"]).run_path()
            models = ModelPair.load(run_dir, cfgd["models"])
    else:
        for kind, payload in models.checkpoints().items():
            want = cfgd["models"][kind]["sha256"]
            if digest(payload) != want:
                raise ChecksumFail(f"{kind} model does not match the archive", {"model": kind})

    spec = BlockSpec.from_dict(manifest.ae_spec)
    layout = layout_for(shape, spec)
    stats = [NormStats.from_dict(s) for s in manifest.norm_stats]
    h_symbols = decode_symbol_stream(lossless_unpack(sections["hbae_latents"]), sections["tables.hbae"])
    b_symbols = decode_symbol_stream(lossless_unpack(sections["bae_latents"]), sections["tables.bae"])
    xr_blocks = decode_ae(h_symbols, b_symbols, layout, models, cfgd["bins"]["hbae"], cfgd["bins"]["bae"], workers)
    recon_r = to_original(xr_blocks, spec, shape, stats)

    gspec = BlockSpec.from_dict(manifest.gae_spec)
    XG = partition_array(recon_r, gspec)
    groups = gae_block_groups(shape, gspec, manifest.gae_spec.get("group_axis"))
    for g, ids in enumerate(groups):
        meta = cfgd["gae"][g]
        U = unpack_basis(sections[f"pca_basis.g{g}"])
        bitmasks = unpack_index_payload(lossless_unpack(sections[f"gae_indices.g{g}"]), gspec.block_dim)
        coded = lossless_unpack(sections[f"gae_coefficients.g{g}"])
        symbols = decode_symbol_stream(coded, sections[f"tables.gae.g{g}"])
        records = _records_from_streams(ids, bitmasks, symbols, meta["bin"], U.shape[1])
        XG[ids] = apply_records(XG[ids], records, U, block_ids=ids)
    logger.info("decompressed archive (%d bytes) to shape %s", len(buf), shape)
    return Dataset(reassemble_array(XG, gspec, shape), tuple(manifest.dataset["axis_roles"]))


def _records_from_streams(ids: np.ndarray, bitmasks: List[IndexBitmask], symbols: np.ndarray, bin: float,
                          columns: int) -> List[CorrectionRecord]:
    require(len(bitmasks) == len(ids), CorruptStream, "index payload does not cover every block",
            blocks=int(len(ids)), masks=len(bitmasks))
    records, pos = [], 0
    for block_id, bm in zip(ids, bitmasks):
        if bm.length == 0:
            continue
        sel = np.flatnonzero(bm.prefix)
        require(bm.length <= columns, LengthOverflow, "selection exceeds the stored basis columns",
                block_id=int(block_id), length=bm.length, columns=columns)
        require(pos + sel.size <= symbols.size, CorruptStream, "coefficient stream ends early",
                block_id=int(block_id), stored=int(symbols.size))
        records.append(CorrectionRecord(int(block_id), sel, symbols[pos:pos + sel.size], bin))
        pos += sel.size
    require(pos == symbols.size, CorruptStream, "coefficient stream length disagrees with the index masks",
            used=pos, stored=int(symbols.size))
    return records


# ---------- Sweep ----------
def rate_distortion_sweep(cfg: PipelineConfig, taus: Sequence[float], dataset: Optional[Dataset] = None,
                          models: Optional[ModelPair] = None, out_csv: Optional[Union[str, Path]] = None
                          ) -> pd.DataFrame:
    """One model pair, compressed at every tau (largest first)"""
    ds = load_input(cfg, dataset)
    models = models or train(cfg, ds).models
    rows = []
    for tau in sorted(taus, reverse=True):
        res = compress(replace(cfg, tau=float(tau), tau_per_group=None), ds, models, write=False)
        row = {"tau": float(tau), "nrmse": res.report.nrmse, "nrmse_bound": res.report.nrmse_bound,
               "max_block_error": res.report.max_block_error, "compressed_bytes": len(res.archive),
               "stored_coefficients": res.stored_coefficients,
               "corrected_blocks": int(sum(g.corrected_blocks for g in res.guarantees))}
        row.update({f"ratio_{p}": r for p, r in res.report.ratios.items()})
        rows.append(row)
        logger.info("sweep tau=%.3e nrmse=%.3e bytes=%d", tau, res.report.nrmse or 0.0, len(res.archive))
    frame = pd.DataFrame(rows)
    if out_csv is not None:
        Path(out_csv).parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out_csv, index=False)
    return frame
