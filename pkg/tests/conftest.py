import numpy as np
import pytest

from hardy_ladder.behavior import behavior_from_array


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def perturb(b, scale, rng):
    """Add non-negative noise of size ~scale to every entry and renormalize each block."""
    t = b.table + scale * rng.uniform(size=b.table.shape)
    t = t / t.sum(axis=(2, 3), keepdims=True)
    return behavior_from_array(t)
