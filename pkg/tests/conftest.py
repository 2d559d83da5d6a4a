import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cloaksim.spectral.solver import ConditioningWarning

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_conditioning():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConditioningWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_points(rng, d, n, lo, hi):
    r = rng.uniform(lo, hi, n)
    v = rng.normal(size=(n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return r[:, None] * v
