import numpy as np
import pytest

import rangecodec as rc
from rangecodec import synthetic


@pytest.fixture(scope="session")
def street_cloud():
    """One full-size synthetic frame (64 beams)."""
    return synthetic.street_scene(seed=0)


@pytest.fixture(scope="session")
def small_clouds():
    """Four small frames for fast pipeline-level tests."""
    return [synthetic.street_scene(seed=k, n_azimuth=720, n_beams=32) for k in range(4)]


@pytest.fixture(scope="session")
def default_config():
    return rc.ProjectionConfig.from_degrees(0.5, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
