#!/usr/bin/env python3
"""
Command-line entry point for the compressor.

  train       fit HBAE then BAE, write checkpoints and loss curves
  compress    write the archive and its evaluation report
  decompress  rebuild the dataset from an archive
  eval        compare two datasets (optionally charging an archive's bytes)
  synth       generate a synthetic dataset (or a named preset)
  sweep       rate-distortion sweep over several tau values
  ablate      component ablation and quantization sensitivity tables

Every command prints one JSON object; failures print a structured error
record and exit non-zero.
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional

import orjson

from app.config import Config, load_pipeline_config
from src.errors import CompressionError, ConfigError

logger = logging.getLogger("gcdc")


def _emit(obj: Dict[str, Any]) -> None:
    print(orjson.dumps(obj, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY).decode())


def _floats(text: str) -> List[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _ints(text: str) -> List[int]:
    return [int(t) for t in text.replace(",", " ").split()]


def _pipeline_config(args: argparse.Namespace):
    overrides = {k: getattr(args, k, None) for k in ("dataset", "tau", "seed", "workers", "policy", "run_dir")}
    return load_pipeline_config(args.config or Config.get_default_config_path(), **overrides)


# ---------- commands ----------
def cmd_train(args: argparse.Namespace) -> Dict[str, Any]:
    from src.pipeline import train
    cfg = _pipeline_config(args)
    res = train(cfg)
    return {"status": "ok", "run_dir": str(cfg.run_path()),
            "checkpoints": {k: str(v) for k, v in res.paths.items()},
            "final_loss": {"hbae": res.hbae_losses[-1] if res.hbae_losses else None,
                           "bae": res.bae_losses[-1] if res.bae_losses else None},
            "timings_ms": res.timings_ms}


def cmd_compress(args: argparse.Namespace) -> Dict[str, Any]:
    from src.archive import write_archive_file
    from src.pipeline import compress
    cfg = _pipeline_config(args)
    res = compress(cfg)
    if args.out:
        res.path = write_archive_file(args.out, res.archive)
    return {"status": "ok", "archive": str(res.path), "bytes": len(res.archive), **res.report.to_dict()}


def cmd_decompress(args: argparse.Namespace) -> Dict[str, Any]:
    from src.pipeline import decompress
    from src.tensor_core import save_dataset
    t0 = time.perf_counter()
    ds = decompress(args.archive, model_dir=args.models, workers=args.workers)
    out = save_dataset(ds, args.out)
    return {"status": "ok", "out": str(out), "shape": list(ds.shape),
            "timings_ms": {"total": round((time.perf_counter() - t0) * 1000, 2)}}


def cmd_eval(args: argparse.Namespace) -> Dict[str, Any]:
    from src.archive import SizeLedger, read_archive
    from src.pipeline import evaluate
    from src.tensor_core import load_dataset
    cfg = _pipeline_config(args)
    original, recon = load_dataset(args.original), load_dataset(args.recon)
    ledger = None
    if args.archive:
        buf = Path(args.archive).read_bytes()
        manifest, _ = read_archive(buf)
        external = sum(m["bytes"] for m in manifest.config.get("models", {}).values() if not m.get("embedded"))
        ledger = SizeLedger.from_manifest(manifest, len(buf), external)
    return {"status": "ok", **evaluate(original, recon, cfg, ledger=ledger).to_dict()}


def cmd_synth(args: argparse.Namespace) -> Dict[str, Any]:
    from src.synthetic import generate_synthetic
    from src.tensor_core import save_dataset
    kind, shape, axes, seed = args.kind, args.shape, None, args.seed or 0
    preset: Optional[Dict[str, Any]] = None
    if args.preset:
        presets = Config.get_presets()
        if args.preset not in presets:
            raise ConfigError(f"unknown preset {args.preset!r}", {"known": sorted(presets)})
        preset = presets[args.preset]
        kind, shape, axes = preset["kind"], preset["shape"], preset.get("axes")
        seed = args.seed if args.seed is not None else preset.get("seed", 0)
    if kind is None or shape is None:
        raise ConfigError("synth needs --kind and --shape, or --preset", {})
    ds = generate_synthetic(kind, _ints(shape) if isinstance(shape, str) else shape, seed, axes)
    out = save_dataset(ds, args.out or Config.DATA_ROOT / f"{args.preset or kind}.f32")
    return {"status": "ok", "out": str(out), "kind": kind, "shape": list(ds.shape), "axes": list(ds.axis_roles),
            "seed": seed, "config": preset.get("config") if preset else None}


def cmd_sweep(args: argparse.Namespace) -> Dict[str, Any]:
    from src.pipeline import ModelPair, rate_distortion_sweep
    cfg = _pipeline_config(args)
    models = None
    if (cfg.run_path() / Config.HBAE_CHECKPOINT).exists():
        models = ModelPair.load(cfg.run_path())
    out = Path(args.out) if args.out else cfg.run_path() / "sweep.csv"
    frame = rate_distortion_sweep(cfg, _floats(args.taus), models=models, out_csv=out)
    return {"status": "ok", "out": str(out), "rows": frame.to_dict(orient="records")}


def cmd_ablate(args: argparse.Namespace) -> Dict[str, Any]:
    from src.ablation import component_ablation, latent_size_sweep, quantization_sensitivity, refinement_table
    from src.pipeline import ModelPair, load_input, train
    cfg = _pipeline_config(args)
    ds = load_input(cfg)
    out_dir = Path(args.out_dir) if args.out_dir else cfg.run_path() / "ablation"
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    components = component_ablation(ds, cfg, _ints(args.seeds))
    components.to_csv(out_dir / "components.csv", index=False)
    t1 = time.perf_counter()
    if (cfg.run_path() / Config.HBAE_CHECKPOINT).exists():
        models = ModelPair.load(cfg.run_path())
    else:
        models = train(cfg, ds, save=False).models
    quant = quantization_sensitivity(ds, cfg, models, _floats(args.bins))
    quant.to_csv(out_dir / "quantization.csv", index=False)
    t2 = time.perf_counter()
    result = {"status": "ok", "out_dir": str(out_dir), "components": components.to_dict(orient="records"),
              "quantization": quant.to_dict(orient="records")}
    timings = {"components": round((t1 - t0) * 1000, 2), "quantization": round((t2 - t1) * 1000, 2)}

    if args.stacked:
        stacked = refinement_table(ds, cfg, models)
        stacked.to_csv(out_dir / "stacked.csv", index=False)
        result["stacked"] = stacked.to_dict(orient="records")
        t3 = time.perf_counter()
        timings["stacked"] = round((t3 - t2) * 1000, 2)
        t2 = t3
    if args.latent_dims:
        sweep = latent_size_sweep(ds, cfg, _ints(args.latent_dims))
        sweep.to_csv(out_dir / "latent_sweep.csv", index=False)
        result["latent_sweep"] = sweep.to_dict(orient="records")
        timings["latent_sweep"] = round((time.perf_counter() - t2) * 1000, 2)
    result["timings_ms"] = timings
    return result


COMMANDS = {"train": cmd_train, "compress": cmd_compress, "decompress": cmd_decompress, "eval": cmd_eval,
            "synth": cmd_synth, "sweep": cmd_sweep, "ablate": cmd_ablate}


# ---------- CLI ----------
def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description="Error-bounded autoencoder compressor for scientific arrays")
    sub = p.add_subparsers(dest="cmd", required=True)

    def with_overrides(sp: argparse.ArgumentParser, tau: bool = True) -> argparse.ArgumentParser:
        sp.add_argument("--config", help="Pipeline config JSON (defaults to configs/default.json)")
        sp.add_argument("--dataset", help="Dataset path (raw float32 + .hdr, or .csv)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--policy", choices=["include_models", "exclude_models", "amortize_per_variable"])
        sp.add_argument("--run_dir", help="Directory for checkpoints, archive and reports")
        if tau:
            sp.add_argument("--tau", type=float, help="Per-block l2 error bound")
        return sp

    with_overrides(sub.add_parser("train", help="Train HBAE then BAE"), tau=False)

    c = with_overrides(sub.add_parser("compress", help="Compress with the trained models"))
    c.add_argument("--out", help="Archive path (defaults to <run_dir>/archive.gcdc)")

    d = sub.add_parser("decompress", help="Rebuild a dataset from an archive")
    d.add_argument("--archive", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--models", help="Checkpoint directory when the archive does not embed them")
    d.add_argument("--workers", type=int)

    e = with_overrides(sub.add_parser("eval", help="Compare an original and a reconstruction"))
    e.add_argument("--original", required=True)
    e.add_argument("--recon", required=True)
    e.add_argument("--archive", help="Archive whose bytes the ratios are computed from")

    s = sub.add_parser("synth", help="Generate a synthetic dataset")
    s.add_argument("--kind", choices=["smooth", "multivar", "histogram"])
    s.add_argument("--shape", help="Comma separated axis lengths")
    s.add_argument("--preset", choices=["s3d", "e3sm", "xgc"])
    s.add_argument("--seed", type=int)
    s.add_argument("--out")

    w = with_overrides(sub.add_parser("sweep", help="Rate-distortion sweep over tau"), tau=False)
    w.add_argument("--taus", default="1e-1,3e-2,1e-2,3e-3,1e-3")
    w.add_argument("--out", help="CSV path (defaults to <run_dir>/sweep.csv)")

    a = with_overrides(sub.add_parser("ablate", help="Component ablation and quantization sensitivity"), tau=False)
    a.add_argument("--seeds", default="0,1,2")
    a.add_argument("--bins", default="0.001,0.005,0.01,0.05,0.1")
    a.add_argument("--stacked", action="store_true", help="Also try a second residual stage on x^R")
    a.add_argument("--latent_dims", help="Comma separated HBAE latent sizes for a latent-size sweep")
    a.add_argument("--out_dir")
    return p


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(level=Config.get_log_level(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    Config.ensure_directories()
    try:
        _emit(COMMANDS[args.cmd](args))
    except CompressionError as e:
        logger.error("%s failed: %s", args.cmd, e)
        _emit(e.to_record())
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
