"""Rho-mean welfare via discretisation to job interval selection (JISP).

The cake is cut into cells that every agent values at most ``delta*eps/(2n)``
with ``delta = (eps/n^2)^(1/rho)``.  Each agent becomes a job whose candidate
intervals are all cell-aligned intervals, weighted by ``value ** rho``.  A
local-ratio schedule gives a 2-approximate selection, which maps back to a
partial allocation with the same ``sum(value ** rho)``.
"""
from __future__ import annotations

import itertools
from bisect import bisect_left, bisect_right
import json
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import mpmath
import numpy as np

from .allocation import (
    Allocation,
    PartialAllocation,
    WelfareReport,
    complete_allocation,
    welfare_report,
)
from .budget import BudgetExceeded
from .compare import PREC_BITS, Number, mpf_to_fraction, rat_pow, rational_lower_bound, to_mpf
from .model import CakeInstance, Interval, cut_query, format_rat, parse_rat

__all__ = [
    "CutSet",
    "Candidate",
    "JispInstance",
    "GridJisp",
    "JispSolution",
    "DEFAULT_MAX_POINTS",
    "compute_delta",
    "build_cut_set",
    "discretize",
    "local_ratio_solve",
    "brute_force_jisp",
    "solution_to_partial",
    "maximize_rho_mean",
    "min_epsilon_for_budget",
    "inscribed_cells",
]

log = logging.getLogger(__name__)

DEFAULT_MAX_POINTS = 20_000
DEFAULT_ORACLE_CAP = 24


@dataclass(frozen=True)
class CutSet:
    points: tuple[Fraction, ...]
    delta: Fraction
    cell_mass: Fraction

    def __len__(self) -> int:
        return len(self.points)

    def interval(self, l: int, r: int) -> Interval:
        return Interval(self.points[l], self.points[r])


def _check_params(rho, epsilon) -> tuple[Fraction, Fraction]:
    if isinstance(rho, float) or isinstance(epsilon, float):
        raise TypeError("rho and epsilon must be rational")
    rho, epsilon = Fraction(rho), Fraction(epsilon)
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if not 0 < epsilon <= 1:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    return rho, epsilon


def compute_delta(n: int, rho, epsilon) -> Fraction:
    """``(eps/n^2)^(1/rho)``, exact when ``1/rho`` is an integer, else rounded down.

    Rounding down only refines the grid and lowers the low-value threshold,
    so both value-loss bounds of the discretisation still hold.
    """
    rho, epsilon = _check_params(rho, epsilon)
    base = epsilon / (n * n)
    inv = 1 / rho
    if inv.denominator == 1:
        return base ** inv.numerator
    exact = rat_pow(base, inv)
    if isinstance(exact, Fraction):
        return exact
    return rational_lower_bound(exact, 64)


def _points_bound(n: int, cell_mass: Fraction) -> int:
    # every cell but the last exhausts cell_mass of some agent's unit mass
    return n * math.ceil(1 / cell_mass) + 2


def min_epsilon_for_budget(n: int, rho, max_points: int) -> float:
    """Smallest epsilon whose worst-case cut set fits in ``max_points`` (approximate)."""
    rho = Fraction(rho)
    inv = float(1 / rho)
    # points <= n * 2n * (n^2)^(1/rho) / eps^(1 + 1/rho)
    return (2 * n * n * n ** (2 * inv) / max(max_points - 3, 1)) ** (1 / (1 + inv))


def build_cut_set(instance: CakeInstance, rho, epsilon, max_points: int = DEFAULT_MAX_POINTS) -> CutSet:
    """Sweep left to right, each time cutting at the nearest point where some agent's cell mass is reached."""
    rho, epsilon = _check_params(rho, epsilon)
    n = instance.n
    delta = compute_delta(n, rho, epsilon)
    mass = delta * epsilon / (2 * n)
    if instance.normalized and _points_bound(n, mass) > max_points:
        raise BudgetExceeded("cut set", _points_bound(n, mass), max_points)
    end = instance.length
    points = [Fraction(0)]
    x = Fraction(0)
    while x < end:
        nxt = end
        for a, density in enumerate(instance.densities):
            if density.value(x, end) >= mass:
                nxt = min(nxt, cut_query(instance, a, x, mass))
        points.append(nxt)
        x = nxt
        if len(points) > max_points:
            raise BudgetExceeded("cut set", f"more than {max_points} points", max_points)
    return CutSet(tuple(points), delta, mass)


def inscribed_cells(cuts: CutSet, interval: Interval) -> Optional[tuple[int, int]]:
    """Largest cell-aligned ``(l, r)`` inside ``interval`` (``None`` if no whole cell fits)."""
    pts = cuts.points
    l = bisect_left(pts, interval.left)
    r = bisect_right(pts, interval.right) - 1
    if l >= r:
        return None
    return l, r


@dataclass(frozen=True)
class Candidate:
    l: object
    r: object
    w: Number


class JispInstance:
    """Explicit JISP instance: one list of weighted candidate intervals per job."""

    def __init__(self, jobs: Sequence[Sequence[Candidate]]):
        self.jobs = [list(c) for c in jobs]
        self.exact = all(isinstance(c.w, (Fraction, int)) for cands in self.jobs for c in cands)
        if not self.exact:
            # mixed rational/mpf weights are lifted so arithmetic stays homogeneous
            self.jobs = [[Candidate(c.l, c.r, to_mpf(c.w)) for c in cands] for cands in self.jobs]
        for i, cands in enumerate(self.jobs):
            for c in cands:
                if not c.l < c.r:
                    raise ValueError(f"job {i}: candidate needs l < r, got ({c.l}, {c.r})")
                if c.w < 0:
                    raise ValueError(f"job {i}: negative weight {c.w}")

    @property
    def n_jobs(self) -> int:
        return len(self.jobs)

    def n_candidates(self) -> int:
        return sum(len(c) for c in self.jobs)

    def weight(self, job: int, interval) -> Number:
        """Weight of ``interval`` for ``job`` (the largest one if it is listed twice)."""
        ws = [c.w for c in self.jobs[job] if (c.l, c.r) == tuple(interval)]
        if not ws:
            raise KeyError(f"({interval}) is not a candidate of job {job}")
        return max(ws)

    def to_dict(self) -> dict:
        def w(x):
            return format_rat(x if isinstance(x, (Fraction, int)) else mpf_to_fraction(x))

        return {"jobs": [[{"l": c.l, "r": c.r, "w": w(c.w)} for c in cands] for cands in self.jobs]}

    @classmethod
    def from_dict(cls, data: dict) -> JispInstance:
        return cls([[Candidate(c["l"], c["r"], parse_rat(c["w"])) for c in job] for job in data["jobs"]])

    def dumps(self) -> str:
        return json.dumps(self.to_dict()) + "\n"

    @classmethod
    def loads(cls, text: str) -> JispInstance:
        return cls.from_dict(json.loads(text))


class GridJisp:
    """JISP instance in which every job's candidates are all index pairs of one cut set.

    Candidates are never materialised; ``weight(job, l, r)`` is
    ``value_job([x_l, x_r]) ** rho``.
    """

    def __init__(self, instance: CakeInstance, cuts: CutSet, rho):
        self.cuts = cuts
        self.rho = Fraction(rho)
        self.prefix = [[d.cdf(x) for x in cuts.points] for d in instance.densities]

    @property
    def n_jobs(self) -> int:
        return len(self.prefix)

    def n_candidates(self) -> int:
        k = len(self.cuts)
        return self.n_jobs * k * (k - 1) // 2

    def value(self, job: int, l: int, r: int) -> Fraction:
        return self.prefix[job][r] - self.prefix[job][l]

    def weight(self, job: int, interval) -> Number:
        l, r = interval
        return rat_pow(self.value(job, l, r), self.rho)

    def candidates(self, job: int):
        k = len(self.cuts)
        for l, r in itertools.combinations(range(k), 2):
            yield l, r

    def to_explicit(self, max_candidates: int = 200_000) -> JispInstance:
        if self.n_candidates() > max_candidates:
            raise BudgetExceeded("explicit JISP", self.n_candidates(), max_candidates)
        return JispInstance(
            [[Candidate(l, r, self.weight(j, (l, r))) for l, r in self.candidates(j)] for j in range(self.n_jobs)]
        )


@dataclass(frozen=True)
class JispSolution:
    selected: tuple[Optional[tuple], ...]
    weight: Number

    def intervals(self):
        return [(j, iv) for j, iv in enumerate(self.selected) if iv is not None]


def _sum(ws) -> Number:
    ws = list(ws)
    if all(isinstance(w, (Fraction, int)) for w in ws):
        return sum(ws, Fraction(0))
    with mpmath.workprec(PREC_BITS):
        return mpmath.fsum(to_mpf(w) for w in ws)


def _overlap(a, b) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def _unwind(stack, n_jobs: int) -> list:
    selected: list = [None] * n_jobs
    for job, iv in reversed(stack):
        if selected[job] is None and not any(s is not None and _overlap(s, iv) for s in selected):
            selected[job] = iv
    return selected


def _tolerance(jisp: JispInstance, weights) -> Number:
    if jisp.exact:
        return Fraction(0)
    top = max(weights, default=mpmath.mpf(0))
    return top * mpmath.ldexp(1, -(PREC_BITS - 24))


def _local_ratio_explicit(jisp: JispInstance) -> JispSolution:
    with mpmath.workprec(PREC_BITS):
        return _local_ratio_explicit_body(jisp)


def _local_ratio_explicit_body(jisp: JispInstance) -> JispSolution:
    cands = [(j, c.l, c.r, c.w) for j, cs in enumerate(jisp.jobs) for c in cs]
    tol = _tolerance(jisp, [c[3] for c in cands])
    cur = {i: c[3] for i, c in enumerate(cands) if c[3] > tol}
    stack = []
    while cur:
        best = min(cur, key=lambda i: (cands[i][2], -cur[i], cands[i][0], cands[i][1]))
        bj, bl, br, _ = cands[best]
        w = cur[best]
        stack.append((bj, (bl, br)))
        for i in list(cur):
            j, l, r, _ = cands[i]
            if j == bj or (l < br and bl < r):
                cur[i] -= w
                if not cur[i] > tol:
                    del cur[i]
    selected = _unwind(stack, jisp.n_jobs)
    weight = _sum(jisp.weight(j, iv) for j, iv in enumerate(selected) if iv is not None)
    return JispSolution(tuple(selected), weight)


def _local_ratio_grid(jisp: GridJisp) -> JispSolution:
    """Sweep right endpoints in order; all candidates sharing one right end overlap,
    so at most one of them (the heaviest) is taken per endpoint.

    Subtractions are kept as three accumulators instead of per-candidate:
    per job (same-job conflicts), per left index (overlap with a taken
    interval ending later), and their per-job intersection (counted once).
    ``rho == 1`` runs on exact integers; other exponents on float64.
    """
    n, k = jisp.n_jobs, len(jisp.cuts)
    exact = jisp.rho == 1
    if exact:
        scale = 1
        for row in jisp.prefix:
            for v in row:
                scale = math.lcm(scale, v.denominator)
        prefix = np.array([[int(v * scale) for v in row] for row in jisp.prefix], dtype=object)
        zero, tol = 0, 0
    else:
        prefix = np.array([[float(v) for v in row] for row in jisp.prefix], dtype=np.float64)
        zero = 0.0
        tol = 1e-12 * max(float(np.max(prefix[:, -1] - prefix[:, 0])), 1e-300) ** float(jisp.rho)
    rho = float(jisp.rho)
    per_job = np.full(n, zero, dtype=prefix.dtype)
    per_left = np.full(k, zero, dtype=prefix.dtype)
    per_job_left = np.full((n, k), zero, dtype=prefix.dtype)
    stack = []
    for r in range(1, k):
        span = prefix[:, r:r + 1] - prefix[:, :r]
        if not exact:
            span = np.power(np.maximum(span, 0.0), rho)
        cur = span - per_job[:, None] - per_left[None, :r] + per_job_left[:, :r]
        flat = int(np.argmax(cur))
        j, l = divmod(flat, r)
        w = cur[j, l]
        if not w > tol:
            continue
        stack.append((j, (l, r)))
        per_job[j] += w
        per_left[:r] += w
        per_job_left[j, :r] += w
    selected = _unwind(stack, n)
    weight = _sum(jisp.weight(j, iv) for j, iv in enumerate(selected) if iv is not None)
    return JispSolution(tuple(selected), weight)


def local_ratio_solve(jisp) -> JispSolution:
    """Local-ratio 2-approximation for JISP.

    Repeatedly take the positive candidate with the smallest right end (ties:
    larger residual weight, lower job, smaller left end), subtract its
    residual weight from everything conflicting with it, then add the taken
    candidates back in reverse order whenever they still fit.
    """
    if isinstance(jisp, GridJisp):
        return _local_ratio_grid(jisp)
    return _local_ratio_explicit(jisp)


def _prune_dominated(cands: list[Candidate]) -> list[Candidate]:
    kept = []
    for i, c in enumerate(cands):
        if not c.w > 0:
            continue
        dominated = False
        for j, d in enumerate(cands):
            if j == i or not d.w > 0:
                continue
            inside = c.l <= d.l and d.r <= c.r
            better = d.w > c.w or (d.w == c.w and ((d.l, d.r) != (c.l, c.r) or j < i))
            if inside and better:
                dominated = True
                break
        if not dominated:
            kept.append(c)
    return kept


def brute_force_jisp(jisp, cap: int = DEFAULT_ORACLE_CAP) -> JispSolution:
    """Exact maximum-weight selection by exhaustive search (oracle for small instances)."""
    if isinstance(jisp, GridJisp):
        jisp = jisp.to_explicit()
    with mpmath.workprec(PREC_BITS):
        return _brute_force_body(jisp, cap)


def _brute_force_body(jisp: JispInstance, cap: int) -> JispSolution:
    zero = Fraction(0) if jisp.exact else mpmath.mpf(0)
    jobs = [_prune_dominated(c) for c in jisp.jobs]
    total = sum(len(c) for c in jobs)
    if total > cap:
        raise BudgetExceeded("brute-force JISP candidates", total, cap)
    best_sel: list = [None] * len(jobs)
    best_w = [zero]
    best_job = [max((c.w for c in cands), default=zero) for cands in jobs]
    suffix = [zero] * (len(jobs) + 1)
    for i in range(len(jobs) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + best_job[i]

    chosen: list = [None] * len(jobs)

    def search(i: int, acc):
        if i == len(jobs):
            if acc > best_w[0]:
                best_w[0] = acc
                best_sel[:] = chosen
            return
        if best_w[0] > 0 and not acc + suffix[i] > best_w[0]:
            return
        for c in jobs[i]:
            iv = (c.l, c.r)
            if any(s is not None and _overlap(s, iv) for s in chosen[:i]):
                continue
            chosen[i] = iv
            search(i + 1, acc + c.w)
            chosen[i] = None
        search(i + 1, acc)

    search(0, zero)
    weight = _sum(jisp.weight(j, iv) for j, iv in enumerate(best_sel) if iv is not None)
    return JispSolution(tuple(best_sel), weight)


def discretize(instance: CakeInstance, rho, epsilon, max_points: int = DEFAULT_MAX_POINTS):
    """Cut set plus the grid JISP instance it induces (one job per agent)."""
    cuts = build_cut_set(instance, rho, epsilon, max_points)
    return cuts, GridJisp(instance, cuts, rho)


def solution_to_partial(instance: CakeInstance, cuts: CutSet, sol: JispSolution) -> PartialAllocation:
    ivs = [None if s is None else cuts.interval(*s) for s in sol.selected]
    return PartialAllocation(tuple(ivs), instance.length)


def maximize_rho_mean(instance: CakeInstance, rho, epsilon,
                      max_points: int = DEFAULT_MAX_POINTS) -> tuple[Allocation, WelfareReport]:
    """Discretise, solve JISP by local ratio, map back and complete the allocation."""
    rho, epsilon = _check_params(rho, epsilon)
    if epsilon >= 1:
        raise ValueError("epsilon must be < 1")
    if not instance.normalized:
        raise ValueError("rho-mean maximisation requires a normalized instance")
    cuts, jisp = discretize(instance, rho, epsilon, max_points)
    log.info("cut set has %d points", len(cuts))
    sol = local_ratio_solve(jisp)
    partial = solution_to_partial(instance, cuts, sol)
    alloc = complete_allocation(instance, partial)
    return alloc, welfare_report(instance, alloc, rhos=[rho])
