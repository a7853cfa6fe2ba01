#!/usr/bin/env python3
import numpy as np
import orjson
import pytest

from main import build_parser, main
from src.tensor_core import load_dataset


def _run(capsys, argv):
    code = main(argv)
    return code, orjson.loads(capsys.readouterr().out)


def test_synth_writes_dataset(tmp_path, capsys):
    code, out = _run(capsys, ["synth", "--kind", "smooth", "--shape", "4,8,8", "--seed", "2",
                              "--out", str(tmp_path / "s.f32")])
    assert code == 0 and out["status"] == "ok"
    assert out["shape"] == [4, 8, 8]
    assert load_dataset(tmp_path / "s.f32").shape == (4, 8, 8)


def test_synth_without_kind_reports_error(capsys):
    code, out = _run(capsys, ["synth"])
    assert code == 1
    assert out["status"] == "error" and out["error"] == "ConfigError"


def test_unknown_command_exits():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["explode"])


def test_train_compress_decompress_eval(tmp_path, capsys):
    data = tmp_path / "smooth.f32"
    assert _run(capsys, ["synth", "--kind", "smooth", "--shape", "8,12,12", "--seed", "3", "--out", str(data)])[0] == 0
    config = tmp_path / "tiny.json"
    config.write_bytes(orjson.dumps({
        "dataset": str(data), "block_shape": [2, 4, 4], "hyper_k": 2,
        "hbae": {"embed_dim": 8, "latent_dim": 6, "hidden_dim": 16, "epochs": 2, "batch": 8},
        "bae": {"latent_dim": 4, "hidden_dim": 8, "epochs": 2, "batch": 16},
        "tau": 0.05, "workers": 1, "run_dir": str(tmp_path / "run")}))
    common = ["--config", str(config)]

    code, out = _run(capsys, ["train"] + common)
    assert code == 0 and set(out["checkpoints"]) == {"hbae", "bae", "losses"}

    code, out = _run(capsys, ["compress"] + common)
    assert code == 0 and out["max_block_error"] <= 0.05
    archive = out["archive"]

    recon = tmp_path / "recon.f32"
    code, out = _run(capsys, ["decompress", "--archive", archive, "--out", str(recon)])
    assert code == 0 and out["shape"] == [8, 12, 12]

    code, out = _run(capsys, ["eval"] + common + ["--original", str(data), "--recon", str(recon),
                                                  "--archive", archive])
    assert code == 0
    assert out["max_block_error"] <= 0.05
    assert set(out["ratios"]) == {"include_models", "exclude_models", "amortize_per_variable"}
    assert np.isfinite(out["nrmse"])


def test_tau_override_is_validated(tmp_path, capsys):
    code, out = _run(capsys, ["compress", "--tau", "-1"])
    assert code == 1 and out["error"] == "ConfigError"


def test_sweep_trains_then_writes_csv(tmp_path, capsys):
    data = tmp_path / "smooth.f32"
    _run(capsys, ["synth", "--kind", "smooth", "--shape", "8,12,12", "--seed", "4", "--out", str(data)])
    config = tmp_path / "tiny.json"
    config.write_bytes(orjson.dumps({
        "dataset": str(data), "block_shape": [2, 4, 4], "hyper_k": 2,
        "hbae": {"embed_dim": 8, "latent_dim": 6, "hidden_dim": 16, "epochs": 1, "batch": 8},
        "bae": {"latent_dim": 4, "hidden_dim": 8, "epochs": 1, "batch": 16},
        "tau": 0.05, "workers": 1, "run_dir": str(tmp_path / "run")}))

    code, out = _run(capsys, ["sweep", "--config", str(config), "--taus", "0.05,0.2"])
    assert code == 0
    assert [row["tau"] for row in out["rows"]] == [0.2, 0.05]
    assert all(row["max_block_error"] <= row["tau"] for row in out["rows"])
    assert (tmp_path / "run" / "sweep.csv").exists()


def test_ablate_writes_every_table(tmp_path, capsys):
    data = tmp_path / "smooth.f32"
    _run(capsys, ["synth", "--kind", "smooth", "--shape", "8,12,12", "--seed", "5", "--out", str(data)])
    config = tmp_path / "tiny.json"
    config.write_bytes(orjson.dumps({
        "dataset": str(data), "block_shape": [2, 4, 4], "hyper_k": 2,
        "hbae": {"embed_dim": 8, "latent_dim": 6, "hidden_dim": 16, "epochs": 1, "batch": 8},
        "bae": {"latent_dim": 4, "hidden_dim": 8, "epochs": 1, "batch": 16},
        "workers": 1, "run_dir": str(tmp_path / "run")}))

    code, out = _run(capsys, ["ablate", "--config", str(config), "--seeds", "0", "--bins", "0.01",
                              "--stacked", "--latent_dims", "2,6", "--out_dir", str(tmp_path / "abl")])
    assert code == 0
    assert len(out["components"]) == 4 and len(out["quantization"]) == 2
    assert out["stacked"][0]["mse_after"] <= out["stacked"][0]["mse_before"]
    assert [row["latent_dim"] for row in out["latent_sweep"]] == [2, 6]
    for name in ("components", "quantization", "stacked", "latent_sweep"):
        assert (tmp_path / "abl" / f"{name}.csv").exists()
