import numpy as np
import pytest

SEED = 42


@pytest.fixture
def rng():
    """Seeded generator, fresh for every test."""
    return np.random.default_rng(SEED)
