"""Hardness gadgets: cake instances built from a 3-SAT-5 formula.

Each variable ``x_i`` owns a block ``H_i = [14(i-1), 14i]`` of fourteen unit
cells ``e^i_1 .. e^i_14``.  Separator agents ``s_i`` and ``s'_i`` value only
``e^i_7`` and ``e^i_14``.  The base agent ``z_i`` values ``e^i_1, e^i_6,
e^i_8, e^i_13`` at 1/4 each, so it is happy with either the positive half
(cells 1-6) or the negative half (cells 8-13) but not both.  Cells 2-5 and
9-12 carry the positive and negative occurrences of ``x_i``, each valued 1/3
by the clause containing it.  The Nash variant adds a final cell ``G`` holding
the rest of every clause agent's value plus an auxiliary agent ``d``.

A satisfying assignment yields an allocation with
``NSW^(3r+m+1) = 2^-r * 3^-m``.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import mpmath

from .allocation import Allocation, PartialAllocation, complete_allocation
from .compare import PREC_BITS, Number, rat_pow, to_mpf
from .model import CakeInstance, Interval, PiecewiseDensity, rescale_to_unit

__all__ = [
    "CELLS_PER_VARIABLE",
    "InvalidFormula",
    "CnfFormula",
    "GadgetLayout",
    "read_dimacs",
    "parse_dimacs",
    "to_dimacs",
    "build_nsw_instance",
    "build_rho_instance",
    "yes_case_allocation",
    "nsw_yes_bound",
    "rho_yes_values",
    "rho_yes_bound",
    "no_case_factor",
    "eliminate_pure_literals",
    "lift_assignment",
    "random_satisfiable_formula",
]

log = logging.getLogger(__name__)

CELLS_PER_VARIABLE = 14
MAX_OCCURRENCES = 5


class InvalidFormula(ValueError):
    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass(frozen=True)
class CnfFormula:
    """Clauses as tuples of nonzero DIMACS literals (``-i`` is the negation of ``x_i``)."""

    num_vars: int
    clauses: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(tuple(int(l) for l in c) for c in self.clauses))

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)

    def occurrences(self, literal: int) -> list[int]:
        """Indices of the clauses containing ``literal``, in clause order."""
        return [j for j, c in enumerate(self.clauses) if literal in c]

    def violations(self) -> list[str]:
        """Violations of the 3-SAT-5 shape the gadget needs (empty list when fine)."""
        problems = []
        if self.num_vars < 1:
            problems.append("formula has no variables")
        if not self.clauses:
            problems.append("formula has no clauses")
        for j, clause in enumerate(self.clauses):
            if not 1 <= len(clause) <= 3:
                problems.append(f"clause {j + 1} has {len(clause)} literals (need 1 to 3)")
            for lit in clause:
                if lit == 0 or abs(lit) > self.num_vars:
                    problems.append(f"clause {j + 1}: literal {lit} out of range")
            vars_ = [abs(l) for l in clause]
            if len(set(vars_)) != len(vars_):
                problems.append(f"clause {j + 1} mentions a variable twice")
        for i in range(1, self.num_vars + 1):
            pos, neg = len(self.occurrences(i)), len(self.occurrences(-i))
            if pos + neg > MAX_OCCURRENCES:
                problems.append(f"x{i} occurs {pos + neg} times (at most {MAX_OCCURRENCES})")
            if pos == 0:
                problems.append(f"x{i} never occurs positively")
            if neg == 0:
                problems.append(f"x{i} never occurs negatively")
        return problems

    def validate(self) -> None:
        problems = self.violations()
        if problems:
            raise InvalidFormula(problems)

    def satisfies(self, assignment: Sequence[bool]) -> bool:
        """``assignment[i-1]`` is the truth value of ``x_i``."""
        return all(any(_lit_true(l, assignment) for l in c) for c in self.clauses)


def _lit_true(lit: int, assignment: Sequence[bool]) -> bool:
    value = bool(assignment[abs(lit) - 1])
    return value if lit > 0 else not value


def parse_dimacs(text: str) -> CnfFormula:
    num_vars = num_clauses = None
    tokens: list[int] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise InvalidFormula([f"bad problem line {line!r}"])
            num_vars, num_clauses = int(parts[2]), int(parts[3])
            continue
        try:
            tokens.extend(int(t) for t in line.split())
        except ValueError:
            raise InvalidFormula([f"bad clause line {line!r}"]) from None
    if num_vars is None:
        raise InvalidFormula(["missing 'p cnf' line"])
    clauses, current = [], []
    for t in tokens:
        if t == 0:
            clauses.append(tuple(current))
            current = []
        else:
            current.append(t)
    if current:
        clauses.append(tuple(current))
    if len(clauses) != num_clauses:
        raise InvalidFormula([f"header announces {num_clauses} clauses, found {len(clauses)}"])
    return CnfFormula(num_vars, tuple(clauses))


def read_dimacs(path) -> CnfFormula:
    with open(path) as fh:
        return parse_dimacs(fh.read())


def to_dimacs(formula: CnfFormula) -> str:
    lines = [f"p cnf {formula.num_vars} {formula.num_clauses}"]
    lines += [" ".join(str(l) for l in c) + " 0" for c in formula.clauses]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class GadgetLayout:
    """Where the cells sit on the raw cake and which agent plays which role."""

    num_vars: int
    num_clauses: int
    has_aux: bool
    raw_length: int
    roles: tuple[str, ...]
    literal_cells: dict

    def cell(self, i: int, k: int) -> tuple[int, int]:
        """Raw coordinates of ``e^i_k`` (both 1-based)."""
        start = CELLS_PER_VARIABLE * (i - 1) + k - 1
        return start, start + 1

    def unit_cell(self, i: int, k: int) -> Interval:
        a, b = self.cell(i, k)
        return Interval(Fraction(a, self.raw_length), Fraction(b, self.raw_length))

    @property
    def aux_cell(self) -> Optional[tuple[int, int]]:
        if not self.has_aux:
            return None
        start = CELLS_PER_VARIABLE * self.num_vars
        return start, start + 1

    def unit_aux(self) -> Interval:
        a, b = self.aux_cell
        return Interval(Fraction(a, self.raw_length), Fraction(b, self.raw_length))

    def agent(self, role: str) -> int:
        return self.roles.index(role)

    def to_dict(self) -> dict:
        cells = {}
        for i in range(1, self.num_vars + 1):
            for k in range(1, CELLS_PER_VARIABLE + 1):
                iv = self.unit_cell(i, k)
                cells[f"e{i}_{k}"] = {"raw": list(self.cell(i, k)), "unit": iv.to_json()}
        if self.has_aux:
            cells["G"] = {"raw": list(self.aux_cell), "unit": self.unit_aux().to_json()}
        return {
            "num_vars": self.num_vars,
            "num_clauses": self.num_clauses,
            "raw_length": self.raw_length,
            "cells": cells,
            "agents": {role: idx for idx, role in enumerate(self.roles)},
            "literal_cells": {f"{j + 1}:{lit}": f"e{abs(lit)}_{k}" for (j, lit), k in self.literal_cells.items()},
        }


def _literal_cells(formula: CnfFormula) -> dict:
    """``(clause index, literal) -> k``: the q-th occurrence sits in cell 1+q (positive) or 8+q (negative)."""
    cells = {}
    for i in range(1, formula.num_vars + 1):
        for q, j in enumerate(formula.occurrences(i), start=1):
            cells[(j, i)] = 1 + q
        for q, j in enumerate(formula.occurrences(-i), start=1):
            cells[(j, -i)] = 8 + q
    return cells


def _roles(formula: CnfFormula, aux: bool) -> tuple[str, ...]:
    r, m = formula.num_vars, formula.num_clauses
    roles = [f"s{i}" for i in range(1, r + 1)]
    roles += [f"s'{i}" for i in range(1, r + 1)]
    roles += [f"z{i}" for i in range(1, r + 1)]
    roles += [f"a{j}" for j in range(1, m + 1)]
    if aux:
        roles.append("d")
    return tuple(roles)


def _cell_values(formula: CnfFormula, layout: GadgetLayout) -> list[dict]:
    """Per agent: raw cell start -> value of that unit cell."""
    r = formula.num_vars
    out: list[dict] = []
    for i in range(1, r + 1):
        out.append({layout.cell(i, 7)[0]: Fraction(1)})
    for i in range(1, r + 1):
        out.append({layout.cell(i, 14)[0]: Fraction(1)})
    for i in range(1, r + 1):
        out.append({layout.cell(i, k)[0]: Fraction(1, 4) for k in (1, 6, 8, 13)})
    for j, clause in enumerate(formula.clauses):
        vals = {layout.cell(abs(lit), layout.literal_cells[(j, lit)])[0]: Fraction(1, 3) for lit in clause}
        if layout.has_aux:
            vals[layout.aux_cell[0]] = 1 - Fraction(len(clause), 3)
        out.append(vals)
    if layout.has_aux:
        out.append({layout.aux_cell[0]: Fraction(1)})
    return out


def _layout(formula: CnfFormula, aux: bool) -> GadgetLayout:
    r = formula.num_vars
    return GadgetLayout(
        num_vars=r,
        num_clauses=formula.num_clauses,
        has_aux=aux,
        raw_length=CELLS_PER_VARIABLE * r + (1 if aux else 0),
        roles=_roles(formula, aux),
        literal_cells=_literal_cells(formula),
    )


def build_nsw_instance(formula: CnfFormula) -> tuple[CakeInstance, GadgetLayout]:
    """Normalized gadget on ``3r + m + 1`` agents, rescaled from ``[0, 14r+1]`` to the unit cake."""
    formula.validate()
    layout = _layout(formula, aux=True)
    dens = [PiecewiseDensity.from_cells(v, layout.raw_length) for v in _cell_values(formula, layout)]
    raw = CakeInstance(layout.roles, tuple(dens), True, Fraction(layout.raw_length))
    return rescale_to_unit(raw), layout


def _check_rho(rho) -> Fraction:
    if isinstance(rho, float):
        raise TypeError("rho must be rational")
    rho = Fraction(rho)
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    if (1 / rho).denominator != 1:
        raise ValueError(f"1/rho must be an integer so cell values stay rational, got rho={rho}")
    return rho


def build_rho_instance(formula: CnfFormula, rho) -> tuple[CakeInstance, GadgetLayout]:
    """Unnormalized variant on ``3r + m`` agents: no ``G`` or ``d``, each cell value raised to ``1/rho``."""
    formula.validate()
    rho = _check_rho(rho)
    power = int(1 / rho)
    layout = _layout(formula, aux=False)
    dens = [
        PiecewiseDensity.from_cells({c: v ** power for c, v in vals.items()}, layout.raw_length)
        for vals in _cell_values(formula, layout)
    ]
    raw = CakeInstance(layout.roles, tuple(dens), False, Fraction(layout.raw_length))
    return rescale_to_unit(raw), layout


def yes_case_allocation(layout: GadgetLayout, formula: CnfFormula, assignment: Sequence[bool]) -> Allocation:
    """The allocation a satisfying assignment induces, completed to cover the cake.

    ``z_i`` takes the half whose occurrence cells the assignment leaves
    unsatisfied; each clause agent takes the cell of its first true literal.
    """
    if len(assignment) != formula.num_vars:
        raise ValueError(f"assignment has {len(assignment)} values for {formula.num_vars} variables")
    if not formula.satisfies(assignment):
        raise ValueError("assignment does not satisfy the formula")
    r = formula.num_vars
    ivs: list = [None] * len(layout.roles)
    for i in range(1, r + 1):
        ivs[layout.agent(f"s{i}")] = layout.unit_cell(i, 7)
        ivs[layout.agent(f"s'{i}")] = layout.unit_cell(i, 14)
        lo, hi = (8, 13) if assignment[i - 1] else (1, 6)
        ivs[layout.agent(f"z{i}")] = Interval(layout.unit_cell(i, lo).left, layout.unit_cell(i, hi).right)
    for j, clause in enumerate(formula.clauses):
        lit = next(l for l in clause if _lit_true(l, assignment))
        ivs[layout.agent(f"a{j + 1}")] = layout.unit_cell(abs(lit), layout.literal_cells[(j, lit)])
    if layout.has_aux:
        ivs[layout.agent("d")] = layout.unit_aux()
    partial = PartialAllocation(tuple(ivs))
    return complete_allocation(None, partial)


def nsw_yes_bound(r: int, m: int) -> Fraction:
    """``tau^(3r+m+1)`` where ``tau`` is the yes-case Nash welfare."""
    if r < 1 or m < 1:
        raise ValueError("need r, m >= 1")
    return Fraction(1, 2 ** r * 3 ** m)


def rho_yes_values(formula: CnfFormula, rho) -> list[Fraction]:
    """Agent values of the yes-case allocation in the rho-mean gadget, in roster order."""
    rho = _check_rho(rho)
    power = int(1 / rho)
    r, m = formula.num_vars, formula.num_clauses
    z = 2 * Fraction(1, 4) ** power
    return [Fraction(1)] * (2 * r) + [z] * r + [Fraction(1, 3) ** power] * m


def rho_yes_bound(r: int, m: int, rho) -> Number:
    """``2r + r * 2^rho / 4 + m / 3``, the yes-case value of ``sum(v ** rho)``."""
    rho = Fraction(rho)
    twos = rat_pow(Fraction(2), rho)
    if isinstance(twos, Fraction):
        return 2 * r + r * twos / 4 + Fraction(m, 3)
    with mpmath.workprec(PREC_BITS):
        return 2 * r + r * to_mpf(twos) / 4 + mpmath.mpf(m) / 3


def no_case_factor(alpha) -> mpmath.mpf:
    """``c(alpha) = 2^(-alpha/44)``: the Nash welfare ratio a no-instance falls below (report only)."""
    with mpmath.workprec(PREC_BITS):
        return mpmath.power(2, -to_mpf(Fraction(alpha)) / 44)


def eliminate_pure_literals(formula: CnfFormula) -> tuple[CnfFormula, dict, list[int]]:
    """Satisfiability-preserving cleanup so every surviving variable occurs with both signs.

    This is a convenience preprocessor, not part of the reduction.  A
    variable seen with one sign only is fixed to make that sign true and its
    clauses are dropped, repeatedly; unused variables are removed and the
    rest renumbered.  Returns the new formula, the fixed literals
    ``{old_var: value}`` and the map ``new_var - 1 -> old_var``.
    """
    clauses = [tuple(c) for c in formula.clauses]
    fixed: dict[int, bool] = {}
    while True:
        lits = {l for c in clauses for l in c}
        pure = sorted(l for l in lits if -l not in lits)
        if not pure:
            break
        for l in pure:
            fixed[abs(l)] = l > 0
        pure_set = set(pure)
        clauses = [c for c in clauses if not pure_set.intersection(c)]
    used = sorted({abs(l) for c in clauses for l in c})
    renum = {old: new for new, old in enumerate(used, start=1)}
    new_clauses = tuple(tuple((1 if l > 0 else -1) * renum[abs(l)] for l in c) for c in clauses)
    return CnfFormula(len(used), new_clauses), fixed, used


def lift_assignment(assignment: Sequence[bool], fixed: dict, used: Sequence[int], num_vars: int) -> list[bool]:
    """Turn an assignment of the cleaned formula back into one of the original."""
    out = [False] * num_vars
    for old, value in fixed.items():
        out[old - 1] = value
    for new, old in enumerate(used):
        out[old - 1] = bool(assignment[new])
    return out


def random_satisfiable_formula(num_vars: int, num_clauses: int, rng: random.Random) -> tuple[CnfFormula, list[bool]]:
    """A random 3-SAT-5 formula together with a hidden satisfying assignment.

    The first ``num_vars`` clauses chain the variables so that each one shows
    up with both signs; the remaining clauses draw 1 to 3 variables with
    spare occurrences and flip one literal to true if none is.
    """
    if num_vars < 2:
        raise ValueError("need at least two variables")
    if num_clauses < num_vars:
        raise ValueError("need at least as many clauses as variables")
    r = num_vars
    truth = [rng.random() < 0.5 for _ in range(r)]

    def true_lit(i: int) -> int:
        return i if truth[i - 1] else -i

    clauses = [(-true_lit(i), true_lit(i % r + 1)) for i in range(1, r + 1)]
    count = {i: 2 for i in range(1, r + 1)}
    for _ in range(num_clauses - r):
        free = [i for i in range(1, r + 1) if count[i] < MAX_OCCURRENCES]
        if not free:
            break
        size = rng.randint(1, min(3, len(free)))
        vars_ = sorted(rng.sample(free, size))
        lits = [v if rng.random() < 0.5 else -v for v in vars_]
        if not any(_lit_true(l, truth) for l in lits):
            k = rng.randrange(size)
            lits[k] = -lits[k]
        for v in vars_:
            count[v] += 1
        clauses.append(tuple(lits))
    formula = CnfFormula(r, tuple(clauses))
    formula.validate()
    return formula, truth
