"""Seeded random instances for tests, benchmarks and the ``gen random`` command."""
from __future__ import annotations

import random
from fractions import Fraction

from .jisp import Candidate, JispInstance
from .model import CakeInstance, PiecewiseDensity

__all__ = ["random_density", "random_instance", "random_jisp"]


def random_density(rng: random.Random, pieces: int, grid: int = 24, max_density: int = 9) -> PiecewiseDensity:
    """At most ``pieces`` constant pieces on multiples of ``1/grid``, normalized exactly."""
    if pieces < 1:
        raise ValueError("need at least one piece")
    pieces = min(pieces, grid)
    cuts = sorted(rng.sample(range(1, grid), pieces - 1))
    bounds = [0] + cuts + [grid]
    weights = [rng.randint(0, max_density) for _ in range(pieces)]
    if not any(weights):
        weights[rng.randrange(pieces)] = 1
    raw = [(Fraction(bounds[i], grid), Fraction(bounds[i + 1], grid), Fraction(weights[i])) for i in range(pieces)]
    total = sum((e - s) * d for s, e, d in raw)
    return PiecewiseDensity([(s, e, d / total) for s, e, d in raw])


def random_instance(n: int, pieces: int, seed: int, grid: int = 24, max_density: int = 9) -> CakeInstance:
    """``n`` agents with independent random densities; identical seeds give identical instances."""
    if n < 1:
        raise ValueError("need at least one agent")
    rng = random.Random(seed)
    return CakeInstance.from_densities(
        [random_density(rng, rng.randint(1, pieces), grid, max_density) for _ in range(n)]
    )


def random_jisp(rng: random.Random, jobs: int, candidates: int, span: int = 8, max_weight: int = 12) -> JispInstance:
    """Random explicit JISP: each job draws intervals over ``0..span`` with integer or half weights."""
    out = []
    for _ in range(jobs):
        cands = []
        for _ in range(candidates):
            l = rng.randrange(span)
            r = rng.randint(l + 1, span)
            cands.append(Candidate(l, r, Fraction(rng.randint(0, 2 * max_weight), 2)))
        out.append(cands)
    return JispInstance(out)
