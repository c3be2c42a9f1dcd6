import numpy as np
import pytest

from dtmforge.grid import GridSpec
from dtmforge.ground import Heightmap


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def make_heightmap(values, cell_size=1.0, origin=(0.0, 0.0), valid=None):
    """Heightmap from a raw array; valid defaults to the finite cells."""
    values = np.asarray(values, dtype=np.float64)
    if valid is None:
        valid = np.isfinite(values)
    spec = GridSpec(cell_size, origin, values.shape[1], values.shape[0])
    return Heightmap(spec, values, np.asarray(valid, dtype=bool))
