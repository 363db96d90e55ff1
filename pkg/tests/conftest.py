import itertools

import numpy as np
import pytest


def random_pd(rng: np.random.Generator, d: int, floor: float = 0.05) -> np.ndarray:
    """Random symmetric positive definite matrix."""
    B = rng.normal(size=(d, d))
    return B @ B.T + floor * np.eye(d)


def subsets(d: int, k: int):
    return [list(c) for c in itertools.combinations(range(d), k)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
