from fractions import Fraction

import pytest

from cakecut.model import CakeInstance, PiecewiseDensity

F = Fraction


def step(*pieces):
    return PiecewiseDensity([(F(s), F(e), F(d)) for s, e, d in pieces])


def disjoint_pair() -> CakeInstance:
    """Agent 1 likes only the left half, agent 2 only the right half (density 2 each)."""
    return CakeInstance.from_densities([
        step((0, "1/2", 2), ("1/2", 1, 0)),
        step((0, "1/2", 0), ("1/2", 1, 2)),
    ])


def uniform(n: int) -> CakeInstance:
    return CakeInstance.from_densities([PiecewiseDensity.uniform() for _ in range(n)])


@pytest.fixture
def disjoint():
    return disjoint_pair()


@pytest.fixture
def uniform2():
    return uniform(2)
