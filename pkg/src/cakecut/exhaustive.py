"""Exhaustive alpha-approximate Nash welfare search for a handful of agents.

Every agent's value in an optimal division can be rounded down to a level of
the geometric grid ``{alpha^i / n^n} + {1}`` losing at most a factor ``alpha``.
For each vector of levels and each left-to-right agent order a greedy sweep
decides whether the levels are simultaneously achievable.
"""
from __future__ import annotations

import itertools
import logging
import math
from fractions import Fraction
from typing import Optional, Sequence

from .allocation import Allocation, PartialAllocation, WelfareReport, complete_allocation, welfare_report
from .budget import BudgetExceeded, default_budget
from .model import CakeInstance, InsufficientValue, Interval, cut_query

__all__ = ["value_grid", "realize_value_vector", "exhaustive_nsw", "search_size"]

log = logging.getLogger(__name__)


def value_grid(n: int, alpha) -> tuple[Fraction, ...]:
    """Levels ``alpha^i / n^n`` below 1, followed by 1 itself."""
    if isinstance(alpha, float):
        raise TypeError("alpha must be rational")
    alpha = Fraction(alpha)
    if alpha <= 1:
        raise ValueError(f"alpha must exceed 1, got {alpha}")
    if n < 1:
        raise ValueError("need at least one agent")
    levels = []
    level = Fraction(1, n ** n)
    while level < 1:
        levels.append(level)
        level *= alpha
    levels.append(Fraction(1))
    return tuple(levels)


def realize_value_vector(instance: CakeInstance, sigma: Sequence[int],
                         targets: Sequence[Fraction]) -> Optional[PartialAllocation]:
    """Greedy left-to-right realisation of ``targets`` in the order ``sigma``.

    Each agent but the last takes the shortest prefix of the remaining cake
    worth its target; the last agent takes everything that is left.  Returns
    ``None`` when some target cannot be met.
    """
    n = instance.n
    if sorted(sigma) != list(range(n)):
        raise ValueError(f"{sigma!r} is not a permutation of the agents")
    ivs: list = [None] * n
    x = Fraction(0)
    for pos, a in enumerate(sigma):
        target = Fraction(targets[a])
        if target < 0:
            raise ValueError("targets must be nonnegative")
        if pos == n - 1:
            rest = Interval(x, instance.length)
            if instance.value(a, rest) < target:
                return None
            ivs[a] = rest if rest.length > 0 else None
            break
        try:
            y = cut_query(instance, a, x, target)
        except InsufficientValue:
            return None
        if y > x:
            ivs[a] = Interval(x, y)
        x = y
    return PartialAllocation(tuple(ivs), instance.length)


def search_size(n: int, grid_size: int) -> int:
    return grid_size ** n * math.factorial(n)


def exhaustive_nsw(instance: CakeInstance, alpha, budget: int | None = None) -> tuple[Allocation, WelfareReport]:
    """Best realisable grid vector over all agent orders, completed to an allocation.

    Enumerates target vectors lexicographically (outer loop) and orders
    lexicographically (inner loop); the first maximum of the exact value
    product is kept.
    """
    if not instance.normalized:
        raise ValueError("exhaustive search requires a normalized instance")
    n = instance.n
    grid = value_grid(n, alpha)
    budget = default_budget() if budget is None else budget
    need = search_size(n, len(grid))
    if need > budget:
        raise BudgetExceeded("exhaustive NSW search", need, budget)
    log.info("searching %d target vectors x %d orders", len(grid) ** n, math.factorial(n))
    perms = list(itertools.permutations(range(n)))
    best = None
    best_prod = Fraction(-1)
    for targets in itertools.product(grid, repeat=n):
        for sigma in perms:
            partial = realize_value_vector(instance, sigma, targets)
            if partial is None:
                continue
            prod = math.prod((instance.value(a, partial[a]) for a in range(n)), start=Fraction(1))
            if prod > best_prod:
                best, best_prod = partial, prod
    if best is None:
        # unreachable for normalized instances: a proportional division rounds down onto the grid
        raise RuntimeError("no realisable grid vector")
    alloc = complete_allocation(instance, best)
    return alloc, welfare_report(instance, alloc)
