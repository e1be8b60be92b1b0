"""Shared fixtures and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings
from scipy.stats import unitary_group

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def haar_unitary(n: int, seed: int) -> np.ndarray:
    """Haar-random n x n unitary from a fixed seed."""
    return unitary_group.rvs(n, random_state=np.random.default_rng(seed))


def random_complex(shape, rng: np.random.Generator, density: float = 1.0) -> np.ndarray:
    """Gaussian complex matrix with each entry kept with probability ``density``."""
    A = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return np.where(rng.random(shape) < density, A, 0)


def random_symmetric(n: int, rng: np.random.Generator, density: float = 1.0,
                     diagonal: bool = True) -> np.ndarray:
    """Random complex symmetric matrix with optional zero diagonal."""
    A = random_complex((n, n), rng, density)
    B = np.triu(A) + np.triu(A, 1).T
    if not diagonal:
        np.fill_diagonal(B, 0)
    return B


def rel_err(a: complex, b: complex) -> float:
    """Relative error with an absolute floor of 1 for tiny references."""
    return abs(a - b) / max(abs(b), 1.0)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
