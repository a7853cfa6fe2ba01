#!/usr/bin/env python3
import struct

import numpy as np
import pytest

from src.archive import (CATEGORIES, MAGIC, POLICIES, Manifest, SizeLedger, compression_ratio, per_variable_ratios,
                         read_archive, read_archive_file, write_archive, write_archive_file)
from src.errors import ChecksumFail, ConfigError, CorruptPayload, TruncatedFile, VersionMismatch


def _manifest(num_groups=2):
    return Manifest(dataset={"shape": [2, 8, 8], "axis_roles": ["variable", "space", "space"]},
                    ae_spec={"block_shape": [1, 4, 4], "hyper_k": 2, "hyper_axis": 1},
                    gae_spec={"block_shape": [1, 4, 4], "hyper_k": 1, "hyper_axis": 0, "group_axis": 0},
                    norm_stats=[], config={"num_groups": num_groups}, backend="zstd")


def _sections():
    return {"hbae_latents": b"\x01" * 100, "tables.hbae": b"\x02" * 12,
            "pca_basis.g0": b"\x03" * 10, "gae_indices.g0": b"\x04" * 6,
            "pca_basis.g1": b"\x05" * 30, "model_weights.hbae": b"\x06" * 50}


@pytest.fixture
def archive():
    return write_archive(_manifest(), _sections())


# ---------- container ----------
def test_round_trip_is_bit_exact(archive):
    manifest, sections = read_archive(archive)
    assert archive[:4] == MAGIC
    assert sections == _sections()
    assert [s.name for s in manifest.sections] == list(_sections())
    assert write_archive(manifest, sections) == archive


def test_section_naming(archive):
    manifest, _ = read_archive(archive)
    entry = manifest.section("pca_basis.g1")
    assert entry.category == "pca_basis" and entry.group == 1
    assert manifest.section("tables.hbae").group is None
    with pytest.raises(CorruptPayload):
        manifest.section("bae_latents")


def test_file_helpers(tmp_path, archive):
    path = write_archive_file(tmp_path / "nested" / "a.gcdc", archive)
    manifest, sections = read_archive_file(path)
    assert manifest.backend == "zstd" and len(sections) == 6


def test_flipped_section_byte(archive):
    buf = bytearray(archive)
    buf[-1] ^= 0xFF
    with pytest.raises(ChecksumFail):
        read_archive(bytes(buf))


def test_flipped_manifest_byte(archive):
    buf = bytearray(archive)
    buf[20] ^= 0x01
    with pytest.raises(ChecksumFail):
        read_archive(bytes(buf))


def test_unknown_version(archive):
    buf = archive[:4] + struct.pack("<I", 2) + archive[8:]
    with pytest.raises(VersionMismatch):
        read_archive(buf)


def test_bad_magic(archive):
    with pytest.raises(VersionMismatch):
        read_archive(b"ZZZZ" + archive[4:])


@pytest.mark.slow
def test_round_trip_many_cases():
    rng = np.random.default_rng(13)
    for _ in range(10_000):
        groups = int(rng.integers(1, 4))
        sections = {}
        for _ in range(int(rng.integers(0, 6))):
            name = str(rng.choice([c for c in CATEGORIES if c != "manifest"]))
            if rng.uniform() < 0.5:
                name += f".g{int(rng.integers(0, groups))}"
            sections[name] = rng.integers(0, 256, size=int(rng.integers(0, 64)), dtype=np.uint8).tobytes()
        buf = write_archive(_manifest(groups), sections)
        manifest, back = read_archive(buf)
        assert back == sections
        assert SizeLedger.from_manifest(manifest, len(buf)).total == len(buf)


@pytest.mark.parametrize("keep", [10, 20, -1], ids=["header", "manifest", "section"])
def test_truncated(archive, keep):
    with pytest.raises(TruncatedFile):
        read_archive(archive[:keep])


def test_trailing_bytes(archive):
    with pytest.raises(CorruptPayload):
        read_archive(archive + b"\x00")


# ---------- size ledger ----------
def test_ledger_sums_to_file_size(archive):
    manifest, _ = read_archive(archive)
    ledger = SizeLedger.from_manifest(manifest, len(archive))
    assert ledger.total == len(archive)
    assert ledger.sections["pca_basis"] == 40
    assert ledger.sections["tables"] == 12
    assert ledger.sections["manifest"] == len(archive) - 208
    assert ledger.group_bytes == {0: 16, 1: 30}


def test_policies(archive):
    manifest, _ = read_archive(archive)
    ledger = SizeLedger.from_manifest(manifest, len(archive), external_model_bytes=70)
    original = 10_000
    assert ledger.counted_bytes("exclude_models") == len(archive) - 50
    assert ledger.counted_bytes("include_models") == len(archive) - 50 + 120
    assert compression_ratio(original, ledger, "include_models") < compression_ratio(original, ledger)
    for policy in POLICIES:
        assert compression_ratio(original, ledger, policy) > 0
    with pytest.raises(ConfigError):
        ledger.counted_bytes("everything")


def test_per_variable_ratios(archive):
    manifest, _ = read_archive(archive)
    ledger = SizeLedger.from_manifest(manifest, len(archive))
    shared = len(archive) - 50 - 46
    ratios = per_variable_ratios(8000, ledger)
    assert ratios == pytest.approx([4000 / (shared / 2 + 16), 4000 / (shared / 2 + 30)])
    assert compression_ratio(8000, ledger, "amortize_per_variable") == pytest.approx(np.mean(ratios))


def test_ratio_accepts_an_array(archive):
    manifest, _ = read_archive(archive)
    ledger = SizeLedger.from_manifest(manifest, len(archive))
    values = np.zeros((2, 8, 8), dtype=np.float32)
    assert compression_ratio(values, ledger) == pytest.approx(512 / ledger.counted_bytes("exclude_models"))
