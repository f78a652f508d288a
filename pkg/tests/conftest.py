"""Pytest configuration and shared fixtures"""

import os
import sys
from pathlib import Path
import pytest

PROJECT_ROOT = Path(__file__).parent.parent

# Importable as the "src" package; relative config/ and schemas/ resolve from here
sys.path.insert(0, str(PROJECT_ROOT))

os.chdir(PROJECT_ROOT)

from src.config_manager import ConfigManager  # noqa: E402
from src.series_engine import generate_levels, rs_recursion  # noqa: E402
from src.weyl_algebra import build_hamiltonian  # noqa: E402


@pytest.fixture
def schemas_dir():
    """schemas/ holding the report record schema"""
    return PROJECT_ROOT / "schemas"


@pytest.fixture
def config():
    """Dev-overlay configuration"""
    return ConfigManager(config_dir="config", environment="dev")


@pytest.fixture(scope="session")
def hamiltonian():
    """(H0, V) as normal-ordered operators"""
    return build_hamiltonian()


@pytest.fixture(scope="session")
def ground_series():
    """Ground-state energy series through order 40"""
    series, _ = rs_recursion(0, 40, table_cap=0)
    return series


@pytest.fixture(scope="session")
def ground_series_60():
    """Ground-state energy series through order 60"""
    series, _ = rs_recursion(0, 60, table_cap=0)
    return series


@pytest.fixture(scope="session")
def table_series():
    """Generated levels 0..6 through order 6"""
    return generate_levels(range(7), 6)


@pytest.fixture
def tmp_cache_dir(tmp_path, monkeypatch):
    """Empty cache directory, with RESOSC_CACHE_DIR cleared"""
    monkeypatch.delenv("RESOSC_CACHE_DIR", raising=False)
    cache_dir = tmp_path / "cache"
    cache_dir.mkdir()
    return cache_dir
