#!/usr/bin/env python3
"""
Compressed archive container and size accounting.

  "GCDC" | u32 version | u32 manifest length | u32 manifest CRC32
  canonical JSON manifest (sorted keys)
  section payloads, back to back, at the offsets listed in the manifest

Offsets are relative to the first byte after the manifest. Each section
carries its own CRC32. Section names are "<category>[.<detail>][.g<group>]";
the category is what the size ledger reports.
"""

import logging
import re
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import orjson

from src.errors import ChecksumFail, ConfigError, CorruptPayload, TruncatedFile, VersionMismatch

logger = logging.getLogger(__name__)

MAGIC = b"GCDC"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIII")

CATEGORIES = ("hbae_latents", "bae_latents", "pca_basis", "gae_coefficients", "gae_indices", "tables",
              "manifest", "model_weights")
POLICIES = ("include_models", "exclude_models", "amortize_per_variable")
_GROUP_SUFFIX = re.compile(r"\.g(\d+)$")


@dataclass
class SectionEntry:
    name: str
    offset: int
    length: int
    crc32: int

    @property
    def category(self) -> str:
        return self.name.split(".", 1)[0]

    @property
    def group(self) -> Optional[int]:
        m = _GROUP_SUFFIX.search(self.name)
        return int(m.group(1)) if m else None


@dataclass
class Manifest:
    dataset: Dict[str, Any]
    ae_spec: Dict[str, Any]
    gae_spec: Dict[str, Any]
    norm_stats: List[Dict[str, Any]]
    config: Dict[str, Any]
    backend: str
    sections: List[SectionEntry] = field(default_factory=list)
    version: int = FORMAT_VERSION

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["sections"] = [asdict(s) for s in self.sections]
        return d

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "Manifest":
        try:
            return cls(d["dataset"], d["ae_spec"], d["gae_spec"], d["norm_stats"], d["config"], d["backend"],
                       [SectionEntry(**s) for s in d["sections"]], int(d["version"]))
        except (KeyError, TypeError) as e:
            raise CorruptPayload(f"manifest is missing fields: {e}") from e

    def section(self, name: str) -> SectionEntry:
        for s in self.sections:
            if s.name == name:
                return s
        raise CorruptPayload(f"archive has no section {name!r}", {"section": name})


def canonical_json(obj: Any) -> bytes:
    return orjson.dumps(obj, option=orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY)


# ---------- write / read ----------
def write_archive(manifest: Manifest, sections: Mapping[str, bytes]) -> bytes:
    """Sections are laid out in mapping order; the manifest's section table is rebuilt"""
    entries, offset = [], 0
    for name, payload in sections.items():
        payload = bytes(payload)
        entries.append(SectionEntry(name, offset, len(payload), zlib.crc32(payload)))
        offset += len(payload)
    manifest.sections = entries
    manifest.version = FORMAT_VERSION
    body = canonical_json(manifest.to_dict())
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, len(body), zlib.crc32(body))
    return b"".join([header, body] + [bytes(p) for p in sections.values()])


def read_archive(buf: bytes) -> Tuple[Manifest, Dict[str, bytes]]:
    buf = bytes(buf)
    if len(buf) < _HEADER.size:
        raise TruncatedFile("archive shorter than its header", {"size": len(buf)})
    magic, version, mlen, mcrc = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise VersionMismatch("not a GCDC archive (bad magic)", {"magic": magic.hex()})
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"archive version {version} unsupported (reader is {FORMAT_VERSION})",
                              {"version": version, "supported": FORMAT_VERSION})
    start = _HEADER.size + mlen
    if start > len(buf):
        raise TruncatedFile("archive ends inside the manifest", {"manifest_end": start, "size": len(buf)})
    body = buf[_HEADER.size:start]
    if zlib.crc32(body) != mcrc:
        raise ChecksumFail("manifest checksum mismatch", {"section": "manifest"})
    try:
        manifest = Manifest.from_dict(orjson.loads(body))
    except orjson.JSONDecodeError as e:
        raise CorruptPayload(f"manifest is not valid JSON: {e}") from e

    sections: Dict[str, bytes] = {}
    expected = 0
    for s in manifest.sections:
        if s.offset != expected:
            raise CorruptPayload(f"section {s.name} overlaps or leaves a gap", {"section": s.name, "offset": s.offset})
        lo, hi = start + s.offset, start + s.offset + s.length
        if hi > len(buf):
            raise TruncatedFile(f"archive ends inside section {s.name}", {"section": s.name, "needed": hi,
                                                                          "size": len(buf)})
        payload = buf[lo:hi]
        if zlib.crc32(payload) != s.crc32:
            raise ChecksumFail(f"section {s.name} checksum mismatch", {"section": s.name})
        sections[s.name] = payload
        expected += s.length
    if start + expected != len(buf):
        raise CorruptPayload("trailing bytes after the last section", {"extra": len(buf) - start - expected})
    return manifest, sections


def write_archive_file(path: Union[str, Path], payload: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(payload)
    logger.info("wrote archive %s (%d bytes)", path, len(payload))
    return path


def read_archive_file(path: Union[str, Path]) -> Tuple[Manifest, Dict[str, bytes]]:
    return read_archive(Path(path).read_bytes())


# ---------- size accounting ----------
@dataclass
class SizeLedger:
    """Bytes per category; in-file categories sum to the file size"""

    sections: Dict[str, int]
    file_bytes: int
    external_model_bytes: int = 0
    group_bytes: Dict[int, int] = field(default_factory=dict)
    num_groups: int = 1

    @classmethod
    def from_manifest(cls, manifest: Manifest, file_bytes: int, external_model_bytes: int = 0) -> "SizeLedger":
        by_cat = {c: 0 for c in CATEGORIES}
        groups: Dict[int, int] = {}
        for s in manifest.sections:
            by_cat[s.category] = by_cat.get(s.category, 0) + s.length
            if s.group is not None:
                groups[s.group] = groups.get(s.group, 0) + s.length
        by_cat["manifest"] = file_bytes - sum(s.length for s in manifest.sections)
        num_groups = max(len(groups), int(manifest.config.get("num_groups", 1)))
        return cls(by_cat, file_bytes, external_model_bytes, groups, num_groups)

    @property
    def total(self) -> int:
        return sum(self.sections.values())

    @property
    def embedded_model_bytes(self) -> int:
        return self.sections.get("model_weights", 0)

    @property
    def model_bytes(self) -> int:
        return self.embedded_model_bytes + self.external_model_bytes

    def counted_bytes(self, policy: str) -> int:
        if policy not in POLICIES:
            raise ConfigError(f"unknown ratio policy {policy!r}", {"policy": policy, "known": list(POLICIES)})
        without_models = self.file_bytes - self.embedded_model_bytes
        if policy == "include_models":
            return without_models + self.model_bytes
        return without_models

    def to_dict(self) -> Dict[str, Any]:
        return {**self.sections, "file_bytes": self.file_bytes, "external_model_bytes": self.external_model_bytes}


def per_variable_ratios(original_bytes: int, ledger: SizeLedger) -> List[float]:
    """
    Shared cost (latents, tables, manifest, ungrouped sections) is split
    equally across variables; grouped sections are charged to their variable.
    Model weights are excluded.
    """
    v = max(ledger.num_groups, 1)
    grouped = sum(ledger.group_bytes.values())
    shared = ledger.file_bytes - ledger.embedded_model_bytes - grouped
    out = []
    for g in range(v):
        counted = shared / v + ledger.group_bytes.get(g, 0)
        out.append((original_bytes / v) / counted if counted > 0 else float("inf"))
    return out


def compression_ratio(original_bytes: Union[int, Any], ledger: SizeLedger, policy: str = "exclude_models") -> float:
    """
    original bytes / counted compressed bytes. amortize_per_variable is the
    mean of the per-variable ratios.
    """
    if not isinstance(original_bytes, (int, np.integer)):
        original_bytes = int(original_bytes.nbytes)
    if policy == "amortize_per_variable":
        return float(np.mean(per_variable_ratios(int(original_bytes), ledger)))
    counted = ledger.counted_bytes(policy)
    return float(original_bytes) / counted if counted > 0 else float("inf")
