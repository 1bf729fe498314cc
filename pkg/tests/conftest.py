import os

import numpy as np
import pytest

from tailcast.gpd import GpParams, gp_sample


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def make_excesses(gamma, sigma, n, seed):
    return gp_sample(GpParams(gamma, sigma), n, np.random.default_rng(seed))


def milan_path():
    return os.environ.get("TAILCAST_MILAN_CSV")


def dowjones_path():
    return os.environ.get("TAILCAST_DOWJONES_CSV")
