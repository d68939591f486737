"""Pytest configuration and shared fixtures."""

import json
import sys
from pathlib import Path

import pytest

# Add project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from schema import (  # noqa: E402
    FellerClockParams,
    ForwardHorizon,
    GammaOUClockParams,
    HestonParams,
    VarianceGammaParams,
)


@pytest.fixture
def diag_heston():
    """Heston parameters of the small-maturity forward smile figure."""
    return HestonParams(v=0.07, theta=0.07, kappa=1.0, xi=0.34, rho=-0.8)


@pytest.fixture
def diag_horizon():
    return ForwardHorizon(t=0.5, tau=1.0 / 12.0)


@pytest.fixture
def large_heston():
    """Heston parameters of the large-maturity forward smile figure (Case III at t=1)."""
    return HestonParams(v=0.07, theta=0.07, kappa=1.5, xi=0.34, rho=-0.25)


@pytest.fixture
def gou_vg():
    return VarianceGammaParams(C=6.5, G=11.1, M=33.4)


@pytest.fixture
def gou_clock():
    return GammaOUClockParams(v=1.0, lam=1.8, alpha=0.6, delta=0.6)


@pytest.fixture
def feller_vg():
    return VarianceGammaParams(C=58.12, G=50.5, M=69.37)


@pytest.fixture
def feller_clock():
    return FellerClockParams(v=1.0, theta=0.9, kappa=1.23, xi=1.6)


@pytest.fixture
def write_config(tmp_path):
    """Write a run configuration dict to a JSON file and return its path."""
    def _write(payload, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(payload) if not isinstance(payload, str) else payload)
        return str(path)
    return _write


@pytest.fixture
def bs_small_config():
    return {
        "model": {"bs": {"sigma": 0.2}},
        "regime": "small",
        "horizon": {"t": 0.5, "tau": 0.25},
        "strikes": {"lo": -0.1, "hi": 0.1, "step": 0.05},
        "order": 2,
    }
