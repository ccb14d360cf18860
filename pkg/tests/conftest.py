import numpy as np
import pytest

from multilook import sensing


def random_problem(m, n, num_looks, seed, sigma_w=1.0, sigma_z=0.3):
    """Small random instance: Haar rows, random scene in [x_min, 1]."""
    rng = np.random.default_rng(seed)
    a = sensing.haar_partial(m, n, seed)
    x = rng.uniform(sensing.DEFAULT_X_MIN, 1.0, size=n)
    scene = sensing.Scene(pixels=x.reshape(1, n))
    ens = sensing.simulate(scene, a, num_looks, sigma_w, sigma_z, seed=seed + 1)
    return x, ens


@pytest.fixture
def rng():
    return np.random.default_rng(0)
