#!/usr/bin/env python3
"""
Configuration settings for the compressor
Centralized path management and the declarative pipeline configuration
"""

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import orjson
from dotenv import load_dotenv

from src.archive import POLICIES
from src.codec.lossless import BACKENDS
from src.errors import ConfigError, require
from src.tensor_core import NORM_MODES

load_dotenv()


class Config:
    """Configuration class for paths and environment settings"""

    # Base paths
    PROJECT_ROOT = Path(__file__).parent.parent
    APP_ROOT = PROJECT_ROOT / "app"
    SRC_ROOT = PROJECT_ROOT / "src"

    # Data and run paths
    DATA_ROOT = PROJECT_ROOT / "data"
    RUNS_ROOT = PROJECT_ROOT / "runs"
    CONFIGS_ROOT = PROJECT_ROOT / "configs"
    DEFAULT_CONFIG = CONFIGS_ROOT / "default.json"
    SUITE_PATH = PROJECT_ROOT / "suite.json"

    # Output file names inside a run directory
    HBAE_CHECKPOINT = "hbae.gcnn"
    BAE_CHECKPOINT = "bae.gcnn"
    ARCHIVE_NAME = "archive.gcdc"
    REPORT_NAME = "report.json"

    @classmethod
    def ensure_directories(cls):
        """Create necessary directories if they don't exist"""
        for directory in (cls.DATA_ROOT, cls.RUNS_ROOT):
            directory.mkdir(parents=True, exist_ok=True)

    @classmethod
    def get_default_config_path(cls) -> Path:
        return cls.DEFAULT_CONFIG

    @classmethod
    def get_workers(cls) -> int:
        env = os.getenv("GCDC_WORKERS", "").strip()
        return int(env) if env.isdigit() and int(env) > 0 else (os.cpu_count() or 1)

    @classmethod
    def get_log_level(cls) -> str:
        return os.getenv("GCDC_LOG_LEVEL", "INFO").upper()

    @classmethod
    def get_presets(cls) -> Dict[str, Dict[str, Any]]:
        """Dataset presets from suite.json keyed by name"""
        suite = orjson.loads(cls.SUITE_PATH.read_bytes())
        return {p["name"]: p for p in suite.get("presets", [])}


# ---------- pipeline configuration ----------
@dataclass
class HbaeParams:
    embed_dim: int = 128
    latent_dim: int = 128
    hidden_dim: int = 256
    d_k: Optional[int] = None
    use_attention: bool = True
    epochs: int = 50
    batch: int = 32
    lr: float = 1e-3


@dataclass
class BaeParams:
    latent_dim: int = 16
    hidden_dim: Optional[int] = None
    epochs: int = 50
    batch: int = 64
    lr: float = 1e-3


@dataclass
class PipelineConfig:
    block_shape: List[int]
    dataset: Optional[str] = None
    header: Optional[str] = None
    hyper_k: int = 1
    hyper_axis: int = 0
    gae_block_shape: Optional[List[int]] = None
    norm_mode: str = "mean0range1"
    group_axis: Optional[int] = None
    hbae: HbaeParams = field(default_factory=HbaeParams)
    bae: BaeParams = field(default_factory=BaeParams)
    tau: float = 0.01
    tau_per_group: Optional[List[float]] = None
    gae_bin: Optional[float] = None
    hbae_bin: float = 0.005
    bae_bin: float = 0.005
    seed: int = 0
    policy: str = "exclude_models"
    workers: Optional[int] = None
    backend: str = "zstd"
    embed_models: bool = False
    run_dir: str = "runs/default"

    def __post_init__(self):
        if isinstance(self.hbae, dict):
            self.hbae = _build(HbaeParams, self.hbae, "hbae")
        if isinstance(self.bae, dict):
            self.bae = _build(BaeParams, self.bae, "bae")
        self.block_shape = [int(b) for b in self.block_shape]
        if self.gae_block_shape is not None:
            self.gae_block_shape = [int(b) for b in self.gae_block_shape]

    @property
    def effective_gae_block_shape(self) -> List[int]:
        return list(self.gae_block_shape or self.block_shape)

    @property
    def effective_workers(self) -> int:
        return self.workers or Config.get_workers()

    def tau_for_group(self, g: int) -> float:
        return float(self.tau_per_group[g]) if self.tau_per_group else float(self.tau)

    def validate(self) -> "PipelineConfig":
        require(self.tau > 0, ConfigError, f"tau must be positive, got {self.tau}", field="tau")
        if self.tau_per_group is not None:
            require(all(t > 0 for t in self.tau_per_group), ConfigError, "every tau_per_group entry must be positive")
        for name in ("hbae_bin", "bae_bin"):
            require(getattr(self, name) > 0, ConfigError, f"{name} must be positive", field=name)
        require(self.gae_bin is None or self.gae_bin > 0, ConfigError, "gae_bin must be positive", field="gae_bin")
        require(len(self.block_shape) >= 1 and all(b > 0 for b in self.block_shape), ConfigError,
                f"invalid block_shape {self.block_shape}", field="block_shape")
        require(len(self.effective_gae_block_shape) == len(self.block_shape), ConfigError,
                "gae_block_shape must have the same rank as block_shape", field="gae_block_shape")
        require(self.hyper_k >= 1, ConfigError, "hyper_k must be >= 1", field="hyper_k")
        require(self.hbae.latent_dim > 0 and self.bae.latent_dim > 0, ConfigError, "latent dims must be positive")
        require(self.norm_mode in NORM_MODES, ConfigError, f"unknown norm_mode {self.norm_mode!r}", field="norm_mode")
        require(self.policy in POLICIES, ConfigError, f"unknown policy {self.policy!r}", field="policy",
                known=list(POLICIES))
        require(self.backend in BACKENDS, ConfigError, f"unknown backend {self.backend!r}", field="backend",
                known=sorted(BACKENDS))
        if self.group_axis is not None:
            require(0 <= self.group_axis < len(self.block_shape), ConfigError, "group_axis out of range")
            require(self.effective_gae_block_shape[self.group_axis] == 1, ConfigError,
                    "per-variable guarantee needs GAE block extent 1 along group_axis", field="gae_block_shape")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def run_path(self) -> Path:
        return _resolve(self.run_dir)

    def dataset_path(self) -> Optional[Path]:
        return _resolve(self.dataset) if self.dataset is not None else None

    def header_path(self) -> Optional[Path]:
        return _resolve(self.header) if self.header is not None else None


def _resolve(path: Union[str, Path]) -> Path:
    """Relative paths are taken from the working directory when they exist there, else the project root"""
    path = Path(path)
    if path.is_absolute() or path.exists():
        return path
    return Config.PROJECT_ROOT / path


def _build(cls, data: Dict[str, Any], where: str):
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown {where} config keys: {unknown}", {"keys": unknown, "section": where})
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"incomplete {where} config: {e}", {"section": where}) from e


def load_pipeline_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> PipelineConfig:
    """
    JSON config file plus keyword overrides (None values are ignored). Nested
    'hbae' / 'bae' overrides are merged key by key.
    """
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            data = orjson.loads(Path(path).read_bytes())
        except (OSError, orjson.JSONDecodeError) as e:
            raise ConfigError(f"cannot read config {path}: {e}", {"path": str(path)}) from e
    for key, value in overrides.items():
        if value is None:
            continue
        if key in ("hbae", "bae") and isinstance(value, dict):
            data[key] = {**data.get(key, {}), **value}
        else:
            data[key] = value
    cfg = _build(PipelineConfig, data, "pipeline")
    return cfg.validate()


def save_pipeline_config(cfg: PipelineConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(cfg.to_dict(), option=orjson.OPT_INDENT_2))
    return path


# Create global config instance
config = Config()
