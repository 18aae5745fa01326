"""Grid oracle for welfare-optimal connected divisions, plus the bound checks built on it.

The oracle restricts the ``n - 1`` cuts to a finite grid (multiples of a
resolution together with every density breakpoint) and returns the best
division on that grid.  Since a grid division is a division, the oracle's
value never exceeds the true optimum, so ``alg >= oracle / factor`` checks
are sound.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import mpmath

from .allocation import (
    Allocation,
    WelfareReport,
    envy_ratio,
    nsw_product,
    rho_power_sum,
    values,
    welfare_report,
)
from .budget import BudgetExceeded, default_budget
from .compare import PREC_BITS, format_number, geq, rat_pow, to_mpf
from .model import CakeInstance, Interval, format_rat

__all__ = [
    "WELFARES",
    "Verdict",
    "cut_grid",
    "grid_optimal",
    "grid_optimal_enumerate",
    "dp_work",
    "enumeration_work",
    "check_envy_bound",
    "check_ef3",
    "check_ef2",
    "check_nsw3",
    "check_ef_nsw_theorem",
    "check_price_of_ef",
    "check_nash_optimal_4ef",
    "check_rho_mean_theorem",
    "check_exhaustive_nsw",
]

log = logging.getLogger(__name__)

WELFARES = ("nsw", "sw", "rho")


def cut_grid(instance: CakeInstance, resolution) -> list[Fraction]:
    """Multiples of ``resolution`` merged with all density breakpoints."""
    if isinstance(resolution, float):
        raise TypeError("resolution must be rational")
    resolution = Fraction(resolution)
    if not 0 < resolution <= instance.length:
        raise ValueError(f"resolution must lie in (0, {instance.length}], got {resolution}")
    steps = math.floor(instance.length / resolution)
    pts = {resolution * k for k in range(steps + 1)}
    pts.update(instance.breakpoints())
    return sorted(pts)


def dp_work(n: int, grid_size: int) -> int:
    return (1 << n) * n * grid_size * grid_size // 2


def enumeration_work(n: int, grid_size: int) -> int:
    # cuts may coincide, so this counts multisets of n - 1 interior grid points
    return math.comb(grid_size - 2 + n - 1, n - 1) * math.factorial(n)


def _objective(welfare: str, rho):
    """(term transform, combine, zero element) for a separable welfare."""
    if welfare == "nsw":
        return (lambda v: v), (lambda acc, t: acc * t), Fraction(1)
    if welfare == "sw":
        return (lambda v: v), (lambda acc, t: acc + t), Fraction(0)
    if welfare == "rho":
        if rho is None:
            raise ValueError("welfare 'rho' needs a rho value")
        rho = Fraction(rho)
        if rho == 1:
            return (lambda v: v), (lambda acc, t: acc + t), Fraction(0)

        def term(v):
            return to_mpf(rat_pow(v, rho))

        return term, (lambda acc, t: acc + t), mpmath.mpf(0)
    raise ValueError(f"unknown welfare {welfare!r}; expected one of {WELFARES}")


def _report(instance: CakeInstance, alloc: Allocation, welfare: str, rho) -> WelfareReport:
    return welfare_report(instance, alloc, rhos=[rho] if welfare == "rho" else [])


def grid_optimal(instance: CakeInstance, welfare: str = "nsw", resolution=Fraction(1, 32), rho=None,
                 budget: Optional[int] = None) -> tuple[Allocation, WelfareReport]:
    """Best grid division for a product or sum welfare, by dynamic programming.

    ``best[S][k]`` is the best combined objective of giving the agents in
    ``S`` consecutive pieces that exactly cover ``[0, x_k]``.  Values are
    nonnegative, so extending an optimal prefix never loses optimality.
    Pieces may be empty (two cuts at the same point).
    """
    budget = default_budget() if budget is None else budget
    grid = cut_grid(instance, resolution)
    n, k = instance.n, len(grid)
    need = dp_work(n, k)
    if need > budget:
        raise BudgetExceeded("grid oracle", need, budget)
    term, combine, unit = _objective(welfare, rho)
    with mpmath.workprec(PREC_BITS):
        prefix = [[d.cdf(x) for x in grid] for d in instance.densities]
        terms = [[[term(prefix[a][j] - prefix[a][i]) if i <= j else None for j in range(k)] for i in range(k)]
                 for a in range(n)]
        full = (1 << n) - 1
        best: list[list] = [[None] * k for _ in range(1 << n)]
        back: dict = {}
        best[0][0] = unit
        for mask in sorted(range(1 << n), key=lambda m: (bin(m).count("1"), m)):
            row = best[mask]
            for a in range(n):
                if mask & (1 << a):
                    continue
                nxt = best[mask | (1 << a)]
                t = terms[a]
                for i in range(k):
                    base = row[i]
                    if base is None:
                        continue
                    ti = t[i]
                    for j in range(i, k):
                        cand = combine(base, ti[j])
                        cur = nxt[j]
                        if cur is None or cand > cur:
                            nxt[j] = cand
                            back[(mask | (1 << a), j)] = (mask, a, i)
        # walk back from covering the whole cake with everyone
        ivs: list = [None] * n
        mask, j = full, k - 1
        while mask:
            prev, a, i = back[(mask, j)]
            if grid[i] < grid[j]:
                ivs[a] = Interval(grid[i], grid[j])
            mask, j = prev, i
    alloc = Allocation(tuple(ivs), instance.length)
    log.debug("grid oracle: %d points, objective %s", k, best[full][k - 1])
    return alloc, _report(instance, alloc, welfare, rho)


def grid_optimal_enumerate(instance: CakeInstance, welfare: str = "nsw", resolution=Fraction(1, 32), rho=None,
                           budget: Optional[int] = None) -> tuple[Allocation, WelfareReport]:
    """Same optimum as :func:`grid_optimal` by listing every cut multiset and agent order.

    Much slower; kept as an independent cross-check for small grids.
    """
    budget = default_budget() if budget is None else budget
    grid = cut_grid(instance, resolution)
    n, k = instance.n, len(grid)
    need = enumeration_work(n, k)
    if need > budget:
        raise BudgetExceeded("grid enumeration", need, budget)
    term, combine, unit = _objective(welfare, rho)
    best_val, best_ivs = None, None
    with mpmath.workprec(PREC_BITS):
        for cuts in itertools.combinations_with_replacement(grid[1:-1], n - 1):
            bounds = (grid[0],) + cuts + (grid[-1],)
            pieces = [Interval(bounds[p], bounds[p + 1]) for p in range(n)]
            for order in itertools.permutations(range(n)):
                acc = unit
                for pos, a in enumerate(order):
                    acc = combine(acc, term(instance.value(a, pieces[pos])))
                if best_val is None or acc > best_val:
                    best_val = acc
                    best_ivs = [None] * n
                    for pos, a in enumerate(order):
                        if pieces[pos].length > 0:
                            best_ivs[a] = pieces[pos]
    alloc = Allocation(tuple(best_ivs), instance.length)
    return alloc, _report(instance, alloc, welfare, rho)


@dataclass
class Verdict:
    """Outcome of one bound check; ``passed`` is ``None`` when the check does not apply."""

    name: str
    passed: Optional[bool]
    lhs: str
    rhs: str
    figures: dict = field(default_factory=dict)
    approximate: bool = False

    @property
    def status(self) -> str:
        if self.passed is None:
            return "n/a"
        return "pass" if self.passed else "FAIL"

    def to_dict(self) -> dict:
        return {
            "check": self.name,
            "status": self.status,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "approximate": self.approximate,
            "figures": self.figures,
        }


def _ratio_str(r) -> str:
    return "inf" if r == math.inf else format_rat(r)


def check_envy_bound(instance: CakeInstance, alloc: Allocation, bound: Fraction, name: str = "envy") -> Verdict:
    """``envy_ratio(alloc) <= bound``, exactly."""
    ratio = envy_ratio(instance, alloc)
    ok = ratio != math.inf and ratio <= bound
    return Verdict(name, ok, _ratio_str(ratio), format_rat(bound),
                   {"envy_ratio_decimal": format_number(ratio)})


def check_ef3(instance: CakeInstance, alloc: Allocation, epsilon=Fraction(1, 3)) -> Verdict:
    """Envy ratio at most ``3 + 9 eps / n``."""
    return check_envy_bound(instance, alloc, 3 + 9 * Fraction(epsilon) / instance.n, "ef3")


def check_ef2(instance: CakeInstance, alloc: Allocation, epsilon=Fraction(1, 3)) -> Verdict:
    """Envy ratio at most ``2 + 9 eps / n``."""
    return check_envy_bound(instance, alloc, 2 + 9 * Fraction(epsilon) / instance.n, "ef2")


def _nsw_factor_check(name: str, instance: CakeInstance, alloc: Allocation, factor_pow: Fraction,
                      oracle_report: WelfareReport, extra: dict | None = None) -> Verdict:
    """``factor^n * prod(alloc) >= prod(oracle)``; both sides rational."""
    lhs = factor_pow * nsw_product(instance, alloc)
    rhs = oracle_report.nsw_product
    figures = {"factor_to_n": format_rat(factor_pow), "nsw_product": format_rat(nsw_product(instance, alloc)),
               "oracle_nsw_product": format_rat(rhs)}
    figures.update(extra or {})
    return Verdict(name, lhs >= rhs, format_rat(lhs), format_rat(rhs), figures)


def check_nsw3(instance: CakeInstance, alloc: Allocation, oracle_report: WelfareReport) -> Verdict:
    """``NSW(alloc) >= oracle NSW / (3 + 5/n)`` via exact n-th powers."""
    n = instance.n
    return _nsw_factor_check("nsw3", instance, alloc, (3 + Fraction(5, n)) ** n, oracle_report)


def check_ef_nsw_theorem(instance: CakeInstance, alloc: Allocation, oracle_report: WelfareReport) -> Verdict:
    """An alpha-EF division is a ``2 alpha`` approximation of the Nash optimum."""
    alpha = envy_ratio(instance, alloc)
    if alpha == math.inf:
        return Verdict("efnsw", None, "alpha = inf", "-", {"reason": "envy ratio is infinite"})
    return _nsw_factor_check("efnsw", instance, alloc, (2 * alpha) ** instance.n, oracle_report,
                             {"alpha": format_rat(alpha)})


def check_exhaustive_nsw(instance: CakeInstance, alloc: Allocation, alpha, oracle_report: WelfareReport) -> Verdict:
    """``NSW(alloc) >= oracle NSW / alpha``."""
    return _nsw_factor_check("exhaustive", instance, alloc, Fraction(alpha) ** instance.n, oracle_report)


def check_price_of_ef(instance: CakeInstance, alloc: Allocation, rho, oracle_report: WelfareReport) -> Verdict:
    """``oracle M_rho <= 2 alpha 2^(1/rho) n^(rho/(rho+1)) M_rho(alloc)``."""
    rho = Fraction(rho)
    alpha = envy_ratio(instance, alloc)
    if alpha == math.inf:
        return Verdict("price", None, "alpha = inf", "-", {"reason": "envy ratio is infinite"})
    n = instance.n
    with mpmath.workprec(PREC_BITS):
        mine = to_mpf(_rho_mean_of(values(instance, alloc), rho))
        theirs = to_mpf(_rho_mean_of(oracle_report.values, rho))
        factor = 2 * to_mpf(alpha) * mpmath.power(2, 1 / to_mpf(rho)) * mpmath.power(n, to_mpf(rho / (rho + 1)))
        lhs = factor * mine
        ok = geq(lhs, theirs)
    return Verdict("price", ok, format_number(lhs), format_number(theirs),
                   {"alpha": format_rat(alpha), "rho": format_rat(rho), "factor": format_number(factor),
                    "rho_mean": format_number(mine), "oracle_rho_mean": format_number(theirs)})


def _rho_mean_of(vals, rho: Fraction):
    total = rho_power_sum(vals, rho)
    with mpmath.workprec(PREC_BITS):
        return mpmath.power(to_mpf(total) / len(vals), 1 / to_mpf(rho))


def check_rho_mean_theorem(instance: CakeInstance, alloc: Allocation, rho, epsilon,
                           oracle_report: WelfareReport) -> Verdict:
    """``M_rho(alloc) >= (2 + 4 eps e / n)^(-1/rho) * oracle M_rho``, compared as rho-th powers."""
    rho, epsilon = Fraction(rho), Fraction(epsilon)
    n = instance.n
    with mpmath.workprec(PREC_BITS):
        factor = 2 + 4 * to_mpf(epsilon) * mpmath.e / n
        mine = to_mpf(rho_power_sum(values(instance, alloc), rho))
        theirs = to_mpf(rho_power_sum(oracle_report.values, rho))
        lhs = factor * mine
        ok = geq(lhs, theirs)
        ratio = theirs / mine if mine > 0 else mpmath.inf
    return Verdict("rho-mean", ok, format_number(lhs), format_number(theirs),
                   {"rho": format_rat(rho), "epsilon": format_rat(epsilon), "factor": format_number(factor),
                    "power_sum": format_number(mine), "oracle_power_sum": format_number(theirs),
                    "achieved_ratio": format_number(ratio)})


def check_nash_optimal_4ef(instance: CakeInstance, oracle_alloc: Allocation, slack=Fraction(1, 4)) -> Verdict:
    """Grid-Nash-optimal division is ``(4 + slack)``-EF.

    Only approximate: the grid optimum is not the true Nash optimum, so a
    positive slack is needed.
    """
    slack = Fraction(slack)
    if slack < 0:
        raise ValueError("slack must be nonnegative")
    verdict = check_envy_bound(instance, oracle_alloc, 4 + slack, "4ef")
    verdict.approximate = True
    verdict.figures["slack"] = format_rat(slack)
    return verdict
