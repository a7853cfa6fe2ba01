#!/usr/bin/env python3
import numpy as np
import pytest

from src.errors import ConfigError, MissingBlock, NonFiniteValue, RankMismatch, ShapeMismatch
from src.tensor_core import (BlockSpec, Dataset, denormalize, group_hyper, load_dataset, normalize, partition,
                             partition_array, reassemble, reassemble_array, save_dataset)


def _ds(values, roles=None):
    values = np.asarray(values, dtype=np.float32)
    return Dataset(values, roles or ("space",) * values.ndim)


# ---------- normalization ----------
def test_constant_group_is_flagged():
    out, stats = normalize(_ds([2, 2, 2]), "mean0range1")
    assert np.array_equal(out.values, np.zeros(3, dtype=np.float32))
    assert stats[0].mean == 2.0 and stats[0].scale == 1.0 and stats[0].constant


def test_mean0range1_two_values():
    out, _ = normalize(_ds([0, 1]), "mean0range1")
    assert np.allclose(out.values, [-0.5, 0.5])


def test_zscore_matches_scalar_oracle():
    vals = [1.0, 2.0, 3.0, 4.0]
    mean = sum(vals) / len(vals)
    std = (sum((v - mean) ** 2 for v in vals) / len(vals)) ** 0.5
    out, stats = normalize(_ds(vals), "zscore")
    assert stats[0].mean == pytest.approx(2.5)
    assert stats[0].scale == pytest.approx(1.25 ** 0.5)
    assert np.allclose(out.values, [(v - mean) / std for v in vals], atol=1e-6)


def test_per_group_normalization_and_inverse(rng):
    values = rng.normal(size=(3, 5, 4)) * np.array([1.0, 10.0, 100.0])[:, None, None]
    ds = Dataset(values, ("variable", "time", "space"))
    out, stats = normalize(ds, "mean0range1", group_axis=0)
    assert len(stats) == 3
    for g in range(3):
        v = out.values[g].astype(np.float64)
        assert abs(v.mean()) < 1e-6
        assert v.max() - v.min() == pytest.approx(1.0, rel=1e-6)
    back = denormalize(out, stats)
    assert np.allclose(back.values, ds.values, rtol=1e-6, atol=1e-6 * np.abs(ds.values).max())


def test_unknown_mode_rejected():
    with pytest.raises(ConfigError):
        normalize(_ds([1, 2]), "minmax")


def test_non_finite_dataset_rejected():
    with pytest.raises(NonFiniteValue):
        _ds([1.0, np.nan])


# ---------- partitioning ----------
def test_identity_partition():
    values = np.arange(16, dtype=np.float32).reshape(4, 4)
    grid = partition(_ds(values), BlockSpec((4, 4)))
    assert len(grid) == 1
    assert np.array_equal(grid.data[0], values.reshape(-1))


def test_edge_block_is_zero_padded():
    values = np.arange(24, dtype=np.float32).reshape(6, 4) + 1
    grid = partition(_ds(values), BlockSpec((4, 4)))
    assert len(grid) == 2
    second = grid.data[1].reshape(4, 4)
    assert np.array_equal(second[:2], values[4:])
    assert not second[2:].any()
    assert grid.pad_mask[1].sum() == 8
    assert grid.origin(1) == (4, 0)


def test_block_count_for_large_grid():
    spec = BlockSpec((58, 5, 4, 4))
    assert spec.num_blocks((58, 50, 640, 640)) == 256000


def test_partition_reassemble_is_exact(rng):
    values = rng.normal(size=(7, 9, 5)).astype(np.float32)
    spec = BlockSpec((3, 4, 2))
    blocks = partition_array(values, spec)
    assert blocks.shape == (3 * 3 * 3, 24)
    assert np.array_equal(reassemble_array(blocks, spec, values.shape), values)


def test_reassemble_from_block_list_with_stats(rng):
    ds = Dataset(rng.normal(size=(6, 6)).astype(np.float32) * 5 + 3, ("time", "space"))
    normed, stats = normalize(ds, "zscore")
    spec = BlockSpec((4, 4))
    grid = partition(normed, spec)
    back = reassemble(list(grid), spec, stats, shape=ds.shape, axis_roles=ds.axis_roles)
    assert back.axis_roles == ds.axis_roles
    assert np.allclose(back.values, ds.values, atol=1e-5)


def test_missing_block_detected():
    spec = BlockSpec((2, 2))
    grid = partition(_ds(np.ones((4, 4))), spec)
    with pytest.raises(MissingBlock):
        reassemble(list(grid)[:-1], spec, shape=(4, 4))


def test_rank_mismatch():
    with pytest.raises(RankMismatch):
        partition(_ds(np.ones((4, 4))), BlockSpec((2, 2, 2)))


def test_block_larger_than_axis():
    with pytest.raises(ShapeMismatch):
        BlockSpec((8, 2)).validate((4, 4))


# ---------- hyper-blocks ----------
def test_hyper_blocks_group_along_axis():
    ds = _ds(np.arange(6 * 4, dtype=np.float32).reshape(6, 4), ("time", "space"))
    spec = BlockSpec((2, 2), hyper_k=3, hyper_axis=0)
    grid = partition(ds, spec)  # grid (3, 2)
    layout = group_hyper(grid, spec)
    assert layout.ids.tolist() == [[0, 2, 4], [1, 3, 5]]
    assert not layout.pad_counts.any()


def test_short_hyper_block_repeats_last_block():
    ds = _ds(np.ones((10, 2)), ("time", "space"))
    spec = BlockSpec((2, 2), hyper_k=3, hyper_axis=0)
    grid = partition(ds, spec)  # 5 blocks along time
    layout = group_hyper(grid, spec)
    assert layout.ids.tolist() == [[0, 1, 2], [3, 4, 4]]
    assert layout.pad_counts.tolist() == [0, 1]
    hyper = layout.gather(grid.data)
    assert np.array_equal(layout.scatter(hyper), grid.data)


# ---------- ingestion ----------
def test_raw_file_round_trip(tmp_path, rng):
    ds = Dataset(rng.normal(size=(3, 4, 5)), ("variable", "time", "space"))
    path = save_dataset(ds, tmp_path / "field.f32")
    assert (tmp_path / "field.hdr").exists()
    back = load_dataset(path)
    assert back.axis_roles == ds.axis_roles
    assert np.array_equal(back.values, ds.values)


def test_raw_file_without_header(tmp_path):
    np.zeros(4, dtype="<f4").tofile(tmp_path / "x.f32")
    with pytest.raises(ShapeMismatch):
        load_dataset(tmp_path / "x.f32")
