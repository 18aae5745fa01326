"""Partial and complete allocations, plus envy and welfare measurements."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath

from .compare import PREC_BITS, Number, format_number, rat_pow, to_mpf
from .model import CakeInstance, Interval, format_rat, parse_rat

__all__ = [
    "PartialAllocation",
    "Allocation",
    "InvalidAllocation",
    "unassigned_gaps",
    "values",
    "envy_ratio",
    "nsw",
    "nsw_product",
    "sw",
    "rho_mean",
    "rho_power_sum",
    "complete_allocation",
    "WelfareReport",
    "welfare_report",
    "allocation_to_dict",
    "allocation_from_dict",
    "load_allocation",
    "dump_allocation",
]

INF = math.inf


class InvalidAllocation(ValueError):
    pass


def _nonempty(iv: Interval | None) -> bool:
    return iv is not None and iv.length > 0


@dataclass(frozen=True)
class PartialAllocation:
    """Agent-indexed intervals with pairwise disjoint interiors (``None`` = empty)."""

    intervals: tuple[Interval | None, ...]
    length: Fraction = field(default=Fraction(1))

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        problems = self.violations()
        if problems:
            raise InvalidAllocation("; ".join(problems))

    @classmethod
    def empty(cls, n: int) -> PartialAllocation:
        return cls((None,) * n)

    @property
    def n(self) -> int:
        return len(self.intervals)

    def __getitem__(self, agent: int) -> Interval | None:
        return self.intervals[agent]

    def __iter__(self):
        return iter(self.intervals)

    def replace(self, agent: int, interval: Interval | None) -> PartialAllocation:
        ivs = list(self.intervals)
        ivs[agent] = interval
        return type(self)(tuple(ivs), self.length)

    def violations(self) -> list[str]:
        problems = []
        for a, iv in enumerate(self.intervals):
            if iv is not None and (iv.left < 0 or iv.right > self.length):
                problems.append(f"agent {a}: {iv} lies outside [0, {self.length}]")
        occupied = sorted(
            (iv.left, iv.right, a) for a, iv in enumerate(self.intervals) if _nonempty(iv)
        )
        for (l0, r0, a0), (l1, r1, a1) in zip(occupied, occupied[1:]):
            if l1 < r0:
                problems.append(f"agents {a0} and {a1} overlap on [{l1}, {min(r0, r1)}]")
        return problems

    def pieces(self) -> list[tuple[Interval, int]]:
        """Nonempty (interval, agent) pairs sorted left to right."""
        return sorted(((iv, a) for a, iv in enumerate(self.intervals) if _nonempty(iv)),
                      key=lambda p: (p[0].left, p[1]))


class Allocation(PartialAllocation):
    """A partial allocation whose intervals cover the whole cake."""

    def violations(self) -> list[str]:
        problems = super().violations()
        if problems:
            return problems
        if unassigned_gaps(self):
            gaps = ", ".join(str(g) for g in unassigned_gaps(self))
            problems.append(f"cake not covered; uncovered {gaps}")
        return problems


def unassigned_gaps(partial: PartialAllocation) -> list[Interval]:
    """Maximal uncovered intervals of the cake, left to right."""
    gaps = []
    cursor = Fraction(0)
    for iv, _ in partial.pieces():
        if iv.left > cursor:
            gaps.append(Interval(cursor, iv.left))
        cursor = max(cursor, iv.right)
    if cursor < partial.length:
        gaps.append(Interval(cursor, partial.length))
    return gaps


def values(instance: CakeInstance, alloc: PartialAllocation) -> list[Fraction]:
    return [instance.value(a, alloc[a]) for a in range(instance.n)]


def envy_ratio(instance: CakeInstance, alloc: PartialAllocation):
    """Smallest ``alpha >= 1`` making ``alloc`` alpha-approximately envy free.

    Returns :data:`math.inf` if some agent values its own piece at 0 but
    another agent's piece positively.
    """
    worst = Fraction(1)
    for a in range(instance.n):
        own = instance.value(a, alloc[a])
        for b in range(instance.n):
            if b == a:
                continue
            other = instance.value(a, alloc[b])
            if other == 0:
                continue
            if own == 0:
                return INF
            worst = max(worst, other / own)
    return worst


def nsw_product(instance: CakeInstance, alloc: PartialAllocation) -> Fraction:
    """``NSW ** n``, the exact product of realised values."""
    prod = Fraction(1)
    for v in values(instance, alloc):
        prod *= v
    return prod


def nsw(instance: CakeInstance, alloc: PartialAllocation) -> mpmath.mpf:
    return _root(nsw_product(instance, alloc), instance.n)


def _root(x: Fraction, n: int) -> mpmath.mpf:
    with mpmath.workprec(PREC_BITS):
        return mpmath.root(to_mpf(x), n)


def sw(instance: CakeInstance, alloc: PartialAllocation) -> Fraction:
    return sum(values(instance, alloc), Fraction(0)) / instance.n


def _check_rho(rho) -> Fraction:
    rho = Fraction(rho)
    if not 0 < rho <= 1:
        raise ValueError(f"rho must lie in (0, 1], got {rho}")
    return rho


def rho_power_sum(vals: Sequence[Fraction], rho) -> Number:
    """``sum(v ** rho)``; exact when every term is rational."""
    rho = _check_rho(rho)
    terms = [rat_pow(v, rho) for v in vals]
    if all(isinstance(t, Fraction) for t in terms):
        return sum(terms, Fraction(0))
    with mpmath.workprec(PREC_BITS):
        return mpmath.fsum(to_mpf(t) for t in terms)


def rho_mean(instance: CakeInstance, alloc: PartialAllocation, rho) -> Number:
    """Generalized mean ``((1/n) sum v**rho) ** (1/rho)`` of realised values."""
    rho = _check_rho(rho)
    vals = values(instance, alloc)
    if len(set(vals)) == 1:
        return vals[0]
    total = rho_power_sum(vals, rho)
    if isinstance(total, Fraction):
        return rat_pow(total / instance.n, 1 / rho)
    with mpmath.workprec(PREC_BITS):
        return mpmath.power(total / instance.n, 1 / to_mpf(rho))


def complete_allocation(instance: CakeInstance, partial: PartialAllocation) -> Allocation:
    """Extend ``partial`` to cover the cake without lowering anyone's value.

    Each gap joins the assigned interval on its left, or on its right when it
    starts at 0. With nothing assigned, the whole cake goes to agent 0.
    """
    n = partial.n
    if n == 0:
        raise ValueError("cannot complete an allocation with no agents")
    pieces = partial.pieces()
    ivs = list(partial.intervals)
    if not pieces:
        ivs = [None] * n
        ivs[0] = Interval(0, partial.length)
        return Allocation(tuple(ivs), partial.length)
    for idx, (iv, a) in enumerate(pieces):
        left = iv.left
        if idx == 0:
            left = Fraction(0)  # leading gap goes right
        right = pieces[idx + 1][0].left if idx + 1 < len(pieces) else partial.length
        ivs[a] = Interval(left, right)
    return Allocation(tuple(ivs), partial.length)


@dataclass
class WelfareReport:
    values: list[Fraction]
    envy_ratio: object
    nsw_product: Fraction
    nsw: mpmath.mpf
    sw: Fraction
    rho_means: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.values)

    def to_dict(self) -> dict:
        n = self.n
        ratio = self.envy_ratio
        out = {
            "values": [format_rat(v) for v in self.values],
            "values_decimal": [format_number(v) for v in self.values],
            "envy_ratio": "inf" if ratio == INF else format_rat(ratio),
            "envy_ratio_decimal": format_number(ratio),
            "nsw": f"({format_rat(self.nsw_product)})^(1/{n})",
            "nsw_decimal": format_number(self.nsw),
            "sw": format_rat(self.sw),
            "sw_decimal": format_number(self.sw),
        }
        if self.rho_means:
            out["rho_mean"] = {
                format_rat(rho): {"exact": _rho_form(self.values, rho), "decimal": format_number(m)}
                for rho, m in self.rho_means.items()
            }
        return out


def _rho_form(vals: Sequence[Fraction], rho: Fraction) -> str:
    n = len(vals)
    terms = " + ".join(f"({format_rat(v)})^({format_rat(rho)})" for v in vals)
    return f"((1/{n})*({terms}))^({format_rat(1 / rho)})"


def welfare_report(instance: CakeInstance, alloc: PartialAllocation, rhos: Sequence = ()) -> WelfareReport:
    vals = values(instance, alloc)
    prod = Fraction(1)
    for v in vals:
        prod *= v
    return WelfareReport(
        values=vals,
        envy_ratio=envy_ratio(instance, alloc),
        nsw_product=prod,
        nsw=_root(prod, instance.n),
        sw=sum(vals, Fraction(0)) / instance.n,
        rho_means={Fraction(r): rho_mean(instance, alloc, r) for r in rhos},
    )


def allocation_to_dict(instance: CakeInstance, alloc: PartialAllocation) -> dict:
    return {
        "pieces": [
            {"agent": instance.names[a], "left": format_rat(iv.left), "right": format_rat(iv.right)}
            for a, iv in enumerate(alloc.intervals)
            if iv is not None
        ]
    }


def allocation_from_dict(instance: CakeInstance, data: dict, complete: bool = True) -> PartialAllocation:
    """Parse an allocation document; agents without a piece hold the empty interval."""
    ivs: list[Interval | None] = [None] * instance.n
    try:
        for piece in data["pieces"]:
            a = instance.index_of(piece["agent"])
            if ivs[a] is not None:
                raise InvalidAllocation(f"agent {piece['agent']!r} listed twice")
            ivs[a] = Interval(parse_rat(piece["left"]), parse_rat(piece["right"]))
    except (KeyError, TypeError) as exc:
        raise InvalidAllocation(f"malformed allocation document: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, InvalidAllocation):
            raise
        raise InvalidAllocation(str(exc)) from exc
    cls = Allocation if complete else PartialAllocation
    return cls(tuple(ivs), instance.length)


def load_allocation(instance: CakeInstance, path, complete: bool = True) -> PartialAllocation:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidAllocation(f"invalid JSON: {exc}") from exc
    return allocation_from_dict(instance, data, complete)


def dump_allocation(instance: CakeInstance, alloc: PartialAllocation, report: WelfareReport | None = None,
                    path=None) -> str:
    doc = allocation_to_dict(instance, alloc)
    if report is not None:
        doc["report"] = report.to_dict()
    text = json.dumps(doc, indent=2) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
