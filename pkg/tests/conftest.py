from datetime import datetime

import numpy as np
import pytest

from rollstab import GridSpec, RolloutSeries


@pytest.fixture
def small_grid():
    return GridSpec.regular(8, 16)


@pytest.fixture
def fine_grid():
    # resolves all three wavelength bands (small band needs n_lon >= 324)
    return GridSpec.regular(16, 384)


def make_series(grid, data, start=datetime(2021, 1, 1), step_seconds=21600,
                variables=("T2m",)):
    return RolloutSeries(grid=grid, variables=variables, start_time=start,
                         data=np.asarray(data, dtype=np.float32),
                         step_seconds=step_seconds)


@pytest.fixture
def random_series(small_grid):
    rng = np.random.default_rng(7)
    data = rng.standard_normal((12, 1, small_grid.n_lat, small_grid.n_lon))
    return make_series(small_grid, data)
