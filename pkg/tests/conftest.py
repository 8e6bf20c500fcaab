import numpy as np
import pytest

from qcollapse import Grid1D, PhysicalParams, make_gaussian


@pytest.fixture
def params():
    return PhysicalParams()


@pytest.fixture
def grid():
    return Grid1D(-40.0, 40.0, 1024)


@pytest.fixture
def gaussian(grid, params):
    def _make(center=0.0, sigma=1.0, momentum=0.0):
        return make_gaussian(grid, center, sigma, momentum, params)
    return _make


def l2_distance(a, b):
    d = a.amplitudes - b.amplitudes
    return float(np.sqrt(np.sum(np.abs(d) ** 2) * a.grid.dx))
