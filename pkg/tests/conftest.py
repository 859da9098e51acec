"""Pytest configuration and shared fixtures for fidscan tests"""

import tempfile
from pathlib import Path

import numpy as np
import pytest

from fidscan.core.models import SweepCell, SweepGrid, SweepSpec

FIXTURES = Path(__file__).parent / "fixtures"

# onset coupling of each row of the synthetic grid
SYNTHETIC_ONSETS = (0.93, 0.94, 0.98)


@pytest.fixture
def temp_dir():
    """Provide a temporary directory for tests"""
    with tempfile.TemporaryDirectory() as temp_dir:
        yield Path(temp_dir)


@pytest.fixture
def fixtures_dir():
    """Directory holding the sample config and grid files"""
    return FIXTURES


@pytest.fixture
def sample_config_path():
    """A valid run configuration file"""
    return FIXTURES / "sample_config.yaml"


@pytest.fixture
def sample_grid_path():
    """A small BCS grid.csv without any critical cell"""
    return FIXTURES / "grid.csv"


@pytest.fixture
def rng():
    """Seeded random generator"""
    return np.random.default_rng(12345)


def _synthetic_cell(t: float, coupling: float, onset: float) -> SweepCell:
    order = max(0.0, coupling - onset)
    f = 1.0 - 1e-3 / (1.0 + ((coupling - onset) / 0.05) ** 2)
    return SweepCell(
        t=t,
        coupling=coupling,
        order_param=order,
        mu=1.0,
        F=f,
        C=f - 1e-4,
        H=f - 5e-5,
        uhl_dev_max=0.0,
    )


@pytest.fixture
def synthetic_grid():
    """3 x 5 Stoner-like grid: order parameter max(0, u - onset), F dipping at the onset.

    Every row has its onset between the couplings 0.9 and 1.0 (cell 1); the
    dips sit in cells 1, 1 and 2.
    """
    spec = SweepSpec(
        model="stoner",
        t_range=(0.1, 0.3, 3),
        coupling_range=(0.8, 1.2, 5),
        dcoupling=2e-3,
    )
    t_values = [0.1, 0.2, 0.3]
    couplings = [0.8, 0.9, 1.0, 1.1, 1.2]
    cells = [
        [_synthetic_cell(t, u, onset) for u in couplings]
        for t, onset in zip(t_values, SYNTHETIC_ONSETS)
    ]
    for row in cells:
        row[1].critical = True
    return SweepGrid(spec=spec, t_values=t_values, couplings=couplings, cells=cells)
