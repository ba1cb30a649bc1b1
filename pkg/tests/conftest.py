import math

import numpy as np
import pytest

from kba.vectors import normalize


def at_similarity(sim: float, dimension: int = 8, axis: int = 1) -> np.ndarray:
    """Unit vector whose dot product with e_0 is exactly ``sim``."""
    vec = np.zeros(dimension)
    vec[0] = sim
    vec[axis] = math.sqrt(1.0 - sim * sim)
    return normalize(vec)


def e(index: int, dimension: int = 8) -> np.ndarray:
    vec = np.zeros(dimension)
    vec[index] = 1.0
    return normalize(vec)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_unit(rng, n: int, d: int) -> np.ndarray:
    m = rng.normal(size=(n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)
