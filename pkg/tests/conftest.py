import numpy as np
import pytest

from bayesbreak import _kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # compile the numba kernels once so individual test timings stay honest
    for backend in _kernels.available_backends():
        _kernels.warmup(backend)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
