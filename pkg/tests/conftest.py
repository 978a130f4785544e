import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from smilepc.geometry import PointCloud


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_cloud(rng, n=64, scale=1.0):
    return PointCloud(rng.normal(scale=scale, size=(n, 3)))
