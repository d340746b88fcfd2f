import numpy as np
import pytest

from frame_core import FrameFamily, stretched_basis_frame
from graded_spaces import GradedSpace


def random_ladder(rng: np.random.Generator, dim: int, s_max: int, spread: float = 0.5) -> GradedSpace:
    """Monotone ladder: each grade multiplies the previous one by factors in [1, 1 + spread]."""
    rows = [np.ones(dim)]
    for _ in range(s_max):
        rows.append(rows[-1] * (1.0 + spread * rng.random(dim)))
    return GradedSpace.from_ladder(rows)


def random_frame(rng: np.random.Generator, n: int, m: int, s_max: int, spread: float = 0.5) -> FrameFamily:
    G = rng.standard_normal((m, n)) / np.sqrt(m)
    return FrameFamily(G, random_ladder(rng, n, s_max, spread), random_ladder(rng, m, s_max, spread))


@pytest.fixture
def stretched4():
    return stretched_basis_frame(4)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
