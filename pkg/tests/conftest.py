"""Shared fixtures for the simulator test suites."""
import numpy as np
import pytest

from models.cache_models import CacheConfig
from models.engine_models import EngineConfig
from services.cache_service import CacheHierarchy
from services.engine_service import MMEngine
from utils.numerics import QFormat


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def q16():
    return QFormat(16, 16)


def int_matrix(rng, rows, cols, low=-8, high=8):
    """Small integers keep every float-path product and sum exact."""
    return rng.integers(low, high + 1, size=(rows, cols)).astype(np.float64)


def make_engine(t=4, s=2, qformat=None, lhs_rows=256, rhs_rows=64, penalty=10.0, **kwargs):
    hierarchy = CacheHierarchy(s, CacheConfig(rows=lhs_rows, dram_penalty=penalty), CacheConfig(rows=rhs_rows, dram_penalty=penalty))
    return MMEngine(EngineConfig(t=t, s=s), hierarchy, qformat=qformat, **kwargs)


def brute_force_pivot(a):
    """Largest off-diagonal magnitude; ties go to the smallest (p, q), upper element first."""
    n = a.shape[0]
    best, best_key = -1.0, None
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            key = (min(i, j), max(i, j), 0 if i < j else 1)
            mag = abs(a[i, j])
            if mag > best or (mag == best and key < best_key):
                best, best_key = mag, key
    return best_key[0], best_key[1]
