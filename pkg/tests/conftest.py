import numpy as np
import pytest

from condrisk import BooleanAlgebra, FiniteProbSpace, Universe


@pytest.fixture
def s4() -> FiniteProbSpace:
    """Four uniform atoms, two blocks: the standard symmetric fixture."""
    return FiniteProbSpace([0.25, 0.25, 0.25, 0.25], [[1, 2], [3, 4]])


@pytest.fixture
def a2(s4) -> BooleanAlgebra:
    return s4.algebra


@pytest.fixture
def u2(a2) -> Universe:
    return Universe(a2)


@pytest.fixture
def space8() -> FiniteProbSpace:
    """Seeded 8-atom space with three blocks and non-uniform probabilities."""
    rng = np.random.default_rng(2024)
    probs = rng.uniform(0.5, 2.0, 8)
    probs /= probs.sum()
    return FiniteProbSpace(probs, [[1, 2, 3], [4, 5, 6], [7, 8]])
