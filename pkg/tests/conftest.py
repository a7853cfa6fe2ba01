#!/usr/bin/env python3
"""Shared fixtures: project root on sys.path, seeded RNG, tiny configs and datasets"""

import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from app.config import PipelineConfig  # noqa: E402
from src.synthetic import generate_synthetic  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow trend checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running trend check (needs --runslow)")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_config(tmp_path):
    """Small but complete pipeline config writing into a temp run dir"""
    def make(**overrides):
        base = dict(
            block_shape=[2, 4, 4], hyper_k=2, hyper_axis=0, norm_mode="mean0range1",
            hbae={"embed_dim": 8, "latent_dim": 6, "hidden_dim": 16, "epochs": 3, "batch": 8},
            bae={"latent_dim": 4, "hidden_dim": 8, "epochs": 3, "batch": 16},
            tau=0.05, seed=0, workers=1, run_dir=str(tmp_path / "run"))
        base.update(overrides)
        return PipelineConfig(**base).validate()
    return make


@pytest.fixture
def smooth_small():
    return generate_synthetic("smooth", (8, 12, 12), seed=3)


@pytest.fixture
def multivar_small():
    return generate_synthetic("multivar", (3, 8, 8, 8), seed=5)
