import numpy as np
import pytest

try:
    import threadpoolctl

    # two shared vCPUs: multithreaded BLAS on small matrices is a slowdown
    threadpoolctl.threadpool_limits(limits=1, user_api="blas")
except ImportError:
    pass


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_spd(rng, p, jitter=0.0):
    g = rng.standard_normal((p, p + 2))
    return g @ g.T / (p + 2) + jitter * np.eye(p)


def random_psd_rank(rng, p, rank):
    g = rng.standard_normal((p, rank))
    return g @ g.T / rank
