import sys
from pathlib import Path

import numpy as np
import pytest

from phasekit import OpticalConfig

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(FIXTURES))


@pytest.fixture
def cell_config():
    """256^2 grid at the Cell measurement geometry (fully propagating band)."""
    return OpticalConfig(
        wavelength=670e-9, distance_z=1e-3, pixel_pitch=1.12e-6, width=256, height=256
    )


@pytest.fixture
def small_config():
    """Same optics on a small grid for fast solver tests."""
    return OpticalConfig(
        wavelength=670e-9, distance_z=1e-3, pixel_pitch=1.12e-6, width=64, height=64
    )


def random_field(shape, seed):
    rng = np.random.default_rng(seed)
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)
