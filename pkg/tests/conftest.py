import numpy as np
import pytest

from gwpt_uq.config import builtin_config


@pytest.fixture
def small_a1ii():
    """Test a1-ii on coarse grids: fast enough for unit tests."""
    return builtin_config("a1ii", 1 / 32, nz1=16, nz2=8, nz3=16, nz4=16, n_x=1024, ds_dt=0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(20241018)
