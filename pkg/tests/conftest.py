import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_instance(rng, n, d, k, normalize=True):
    """Random Gaussian instance with a planted k-sparse signal."""
    from gsmlasso import ProblemInstance

    A = rng.normal(size=(n, d))
    if normalize:
        A = A / np.linalg.norm(A, axis=0)
    x0 = np.zeros(d)
    supp = rng.choice(d, size=k, replace=False)
    x0[supp] = rng.normal(size=k)
    y = A @ x0
    return ProblemInstance(A, y, k), x0
