import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from stitchkit import generators

settings.register_profile("stitchkit", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("stitchkit")

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.sampled_from([2, 3])


def rng_for(seed):
    return np.random.default_rng(seed)


def small_function(seed, n):
    return generators.random_function(rng_for(seed), n, max_modes=2, max_mode=1, max_degree=1)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
