import os
import sys

import numpy as np
import pytest
from scipy.spatial.distance import cdist

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from modules.metric_space import Space  # noqa: E402
from modules.space_builder import graph_space, grid_space  # noqa: E402


@pytest.fixture
def unit_interval():
    """101-point grid on [0, 1]"""
    return grid_space(1, 101, extent=0.5, offset=0.5)


@pytest.fixture
def line101():
    return grid_space(1, 101)


@pytest.fixture
def path3():
    """a - b - c with unit edges and unit masses"""
    return graph_space(3, [(0, 1, 1.0), (1, 2, 1.0)], name="path3")


@pytest.fixture
def two_points():
    return Space(np.array([[0.0, 1.0], [1.0, 0.0]]), np.ones(2), 1.0, name="two-points")


@pytest.fixture
def parallel_paths():
    """Two 3-point paths far apart in the plane, joined by no edge"""
    coords = np.array([[0, 0], [1, 0], [2, 0], [0, 10], [1, 10], [2, 10]], dtype=float)
    edges = [(0, 1, 1.0), (1, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0)]
    return Space(cdist(coords, coords), np.ones(6), 1.0, skeleton=edges, coords=coords, name="parallel")


def random_weights(n, count, seed=0, dynamic_range=10.0):
    rng = np.random.default_rng(seed)
    return [dynamic_range ** rng.uniform(-1.0, 1.0, n) for _ in range(count)]
