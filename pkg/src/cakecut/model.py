"""Cake instances with piecewise-constant densities and exact Robertson-Webb queries.

All coordinates, densities and values are :class:`fractions.Fraction`.  A cake
is ``[0, length]`` (``length`` is 1 for every instance handed to the solvers;
other lengths only exist transiently before :func:`rescale_to_unit`).
"""
from __future__ import annotations

import json
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

__all__ = [
    "Interval",
    "PiecewiseDensity",
    "CakeInstance",
    "InsufficientValue",
    "InvalidInstance",
    "parse_rat",
    "format_rat",
    "eval_query",
    "cut_query",
    "rightmost_cut_query",
    "validate_instance",
    "rescale_to_unit",
    "load_instance",
    "dump_instance",
    "instance_from_dict",
    "instance_to_dict",
]

_RAT_RE = re.compile(r"^-?\d+(/\d+)?$")


class InsufficientValue(ValueError):
    """A cut query asked for more value than the remaining cake holds."""


class InvalidInstance(ValueError):
    def __init__(self, violations: Sequence[str]):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


def parse_rat(text) -> Fraction:
    """Parse ``"p/q"`` or an integer string. Floats and decimals are rejected."""
    if isinstance(text, int) and not isinstance(text, bool):
        return Fraction(text)
    if not isinstance(text, str) or not _RAT_RE.match(text.strip()):
        raise ValueError(f"not a rational literal: {text!r}")
    value = Fraction(text.strip())
    return value


def format_rat(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True, order=True)
class Interval:
    """Closed interval ``[left, right]``. The empty interval is represented by ``None``."""

    left: Fraction
    right: Fraction

    def __post_init__(self):
        object.__setattr__(self, "left", Fraction(self.left))
        object.__setattr__(self, "right", Fraction(self.right))
        if self.left > self.right:
            raise ValueError(f"left endpoint exceeds right: [{self.left}, {self.right}]")

    @property
    def length(self) -> Fraction:
        return self.right - self.left

    def overlaps(self, other: Interval | None) -> bool:
        """Interiors intersect (touching endpoints do not count)."""
        if other is None:
            return False
        return self.left < other.right and other.left < self.right and self.length > 0 and other.length > 0

    def contains(self, other: Interval | None) -> bool:
        if other is None:
            return True
        return self.left <= other.left and other.right <= self.right

    def to_json(self) -> list[str]:
        return [format_rat(self.left), format_rat(self.right)]

    def __str__(self) -> str:
        return f"[{format_rat(self.left)}, {format_rat(self.right)}]"


class PiecewiseDensity:
    """A nonnegative piecewise-constant density on ``[0, L]``.

    Zero-length pieces are dropped and adjacent pieces with equal density are
    merged, so two densities describing the same function compare equal.
    Prefix integrals at every breakpoint are cached; evaluation and cuts are
    ``O(log k)`` in the number of pieces.
    """

    __slots__ = ("pieces", "_bps", "_dens", "_cum")

    def __init__(self, pieces: Iterable[tuple]):
        raw = sorted(
            ((Fraction(s), Fraction(e), Fraction(d)) for s, e, d in pieces),
            key=lambda p: (p[0], p[1]),
        )
        canon: list[tuple[Fraction, Fraction, Fraction]] = []
        for s, e, d in raw:
            if e == s:
                continue
            if canon and canon[-1][1] == s and canon[-1][2] == d:
                canon[-1] = (canon[-1][0], e, d)
            else:
                canon.append((s, e, d))
        self.pieces: tuple[tuple[Fraction, Fraction, Fraction], ...] = tuple(canon)

        # Query arrays: holes in the tiling are treated as density 0 so that an
        # invalid density can still be inspected; validate_instance reports them.
        bps = [Fraction(0)]
        dens: list[Fraction] = []
        for s, e, d in canon:
            if s > bps[-1]:
                dens.append(Fraction(0))
                bps.append(s)
            elif s < bps[-1]:
                # overlapping pieces: clip (reported by validation)
                s = bps[-1]
                if e <= s:
                    continue
            dens.append(d)
            bps.append(e)
        cum = [Fraction(0)]
        for i, d in enumerate(dens):
            cum.append(cum[-1] + d * (bps[i + 1] - bps[i]))
        self._bps = bps
        self._dens = dens
        self._cum = cum

    @classmethod
    def uniform(cls, density=1, length=1) -> PiecewiseDensity:
        return cls([(0, length, density)])

    @classmethod
    def from_cells(cls, values: dict[int, Fraction], n_cells: int) -> PiecewiseDensity:
        """Unit-length cells ``[k, k+1]`` with the given total value each (others 0)."""
        return cls([(k, k + 1, Fraction(values.get(k, 0))) for k in range(n_cells)])

    def __eq__(self, other) -> bool:
        return isinstance(other, PiecewiseDensity) and self.pieces == other.pieces

    def __hash__(self) -> int:
        return hash(self.pieces)

    def __repr__(self) -> str:
        body = ", ".join(f"({format_rat(s)}, {format_rat(e)}, {format_rat(d)})" for s, e, d in self.pieces)
        return f"PiecewiseDensity([{body}])"

    @property
    def length(self) -> Fraction:
        return self._bps[-1]

    @property
    def breakpoints(self) -> list[Fraction]:
        return list(self._bps)

    @property
    def total(self) -> Fraction:
        return self._cum[-1]

    def cdf(self, x: Fraction) -> Fraction:
        """Integral of the density over ``[0, x]``."""
        bps = self._bps
        if x <= 0:
            return Fraction(0)
        if x >= bps[-1]:
            return self._cum[-1]
        i = bisect_right(bps, x) - 1
        return self._cum[i] + self._dens[i] * (x - bps[i])

    def value(self, left: Fraction, right: Fraction) -> Fraction:
        if right <= left:
            return Fraction(0)
        return self.cdf(right) - self.cdf(left)

    def leftmost_reaching(self, level: Fraction) -> Fraction:
        """Smallest ``y`` with ``cdf(y) == level``, assuming ``0 < level <= total``."""
        cum = self._cum
        k = bisect_left(cum, level)
        # cum[k-1] < level <= cum[k], so piece k-1 has positive density
        return self._bps[k - 1] + (level - cum[k - 1]) / self._dens[k - 1]

    def rightmost_reaching(self, level: Fraction) -> Fraction:
        """Largest ``y`` with ``cdf(y) == level``, assuming ``0 <= level < total``."""
        cum = self._cum
        k = bisect_right(cum, level)
        # cum[k-1] <= level < cum[k]
        return self._bps[k - 1] + (level - cum[k - 1]) / self._dens[k - 1]

    def scaled(self, factor: Fraction) -> PiecewiseDensity:
        """Affine reparameterisation ``x -> x * factor`` preserving every interval's value."""
        factor = Fraction(factor)
        return PiecewiseDensity([(s * factor, e * factor, d / factor) for s, e, d in self.pieces])


@dataclass(frozen=True)
class CakeInstance:
    """``n`` agents, each with a piecewise-constant density over the cake.

    ``normalized`` records whether every agent's total value is meant to be 1
    (the gadgets for the rho-mean hardness reduction are not).
    """

    names: tuple[str, ...]
    densities: tuple[PiecewiseDensity, ...]
    normalized: bool = True
    length: Fraction = field(default=Fraction(1))

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "densities", tuple(self.densities))
        object.__setattr__(self, "length", Fraction(self.length))
        if len(self.names) != len(self.densities):
            raise ValueError("names and densities differ in length")

    @classmethod
    def from_densities(cls, densities: Sequence[PiecewiseDensity], names: Sequence[str] | None = None,
                       normalized: bool = True, length=1) -> CakeInstance:
        if names is None:
            names = [f"a{i + 1}" for i in range(len(densities))]
        return cls(tuple(names), tuple(densities), normalized, Fraction(length))

    @property
    def n(self) -> int:
        return len(self.densities)

    def value(self, agent: int, interval: Interval | None) -> Fraction:
        return eval_query(self, agent, interval)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown agent {name!r}") from None

    def breakpoints(self) -> list[Fraction]:
        """Sorted union of every agent's density breakpoints."""
        pts = set()
        for d in self.densities:
            pts.update(d.breakpoints)
        pts.add(Fraction(0))
        pts.add(self.length)
        return sorted(pts)


def _check_agent(instance: CakeInstance, agent: int) -> PiecewiseDensity:
    if not 0 <= agent < instance.n:
        raise IndexError(f"agent index {agent} out of range for {instance.n} agents")
    return instance.densities[agent]


def eval_query(instance: CakeInstance, agent: int, interval: Interval | None) -> Fraction:
    """Exact value ``v_agent(interval)``; 0 for the empty interval."""
    density = _check_agent(instance, agent)
    if interval is None:
        return Fraction(0)
    if interval.left < 0 or interval.right > instance.length:
        raise ValueError(f"interval {interval} lies outside the cake [0, {instance.length}]")
    return density.value(interval.left, interval.right)


def cut_query(instance: CakeInstance, agent: int, start: Fraction, target: Fraction) -> Fraction:
    """Leftmost ``y >= start`` with ``v_agent([start, y]) == target``."""
    density = _check_agent(instance, agent)
    start, target = Fraction(start), Fraction(target)
    if not 0 <= start <= instance.length:
        raise ValueError(f"start {start} outside the cake")
    if target < 0:
        raise ValueError("target must be nonnegative")
    if target == 0:
        return start
    base = density.cdf(start)
    if density.total - base < target:
        raise InsufficientValue(
            f"agent {agent} values [{start}, {instance.length}] at {density.total - base} < {target}"
        )
    return density.leftmost_reaching(base + target)


def rightmost_cut_query(instance: CakeInstance, agent: int, end: Fraction, target: Fraction) -> Fraction:
    """Rightmost ``y <= end`` with ``v_agent([y, end]) == target``."""
    density = _check_agent(instance, agent)
    end, target = Fraction(end), Fraction(target)
    if not 0 <= end <= instance.length:
        raise ValueError(f"end {end} outside the cake")
    if target < 0:
        raise ValueError("target must be nonnegative")
    if target == 0:
        return end
    top = density.cdf(end)
    if top < target:
        raise InsufficientValue(f"agent {agent} values [0, {end}] at {top} < {target}")
    return density.rightmost_reaching(top - target)


def validate_instance(instance: CakeInstance) -> list[str]:
    """Return every invariant violation; an empty list means the instance is well formed."""
    problems: list[str] = []
    if instance.n < 1:
        problems.append("instance has no agents")
    if instance.length <= 0:
        problems.append(f"cake length {instance.length} is not positive")
    for name, density in zip(instance.names, instance.densities):
        pieces = density.pieces
        if not pieces:
            problems.append(f"{name}: no pieces")
            continue
        if pieces[0][0] != 0:
            problems.append(f"{name}: gap [0, {pieces[0][0]}] before first piece")
        for (s0, e0, _), (s1, e1, _) in zip(pieces, pieces[1:]):
            if s1 > e0:
                problems.append(f"{name}: gap [{e0}, {s1}] between pieces")
            elif s1 < e0:
                problems.append(f"{name}: pieces overlap on [{s1}, {e0}]")
        if pieces[-1][1] != instance.length:
            if pieces[-1][1] < instance.length:
                problems.append(f"{name}: gap [{pieces[-1][1]}, {instance.length}] after last piece")
            else:
                problems.append(f"{name}: pieces extend past the cake end {instance.length}")
        for s, e, d in pieces:
            if d < 0:
                problems.append(f"{name}: negative density {d} on [{s}, {e}]")
        if instance.normalized and density.total != 1:
            problems.append(f"{name}: normalization violated, total value {density.total} != 1")
    if len(set(instance.names)) != len(instance.names):
        problems.append("agent names are not unique")
    return problems


def rescale_to_unit(instance: CakeInstance) -> CakeInstance:
    """Map a cake on ``[0, L]`` onto ``[0, 1]`` via ``x -> x / L``; values are unchanged."""
    length = instance.length
    if length <= 0:
        raise ValueError(f"cake length must be positive, got {length}")
    if length == 1:
        return instance
    factor = 1 / length
    return CakeInstance(
        instance.names,
        tuple(d.scaled(factor) for d in instance.densities),
        instance.normalized,
        Fraction(1),
    )


def instance_from_dict(data: dict) -> CakeInstance:
    try:
        agents = data["agents"]
        normalized = bool(data.get("normalized", True))
        names, densities = [], []
        for entry in agents:
            names.append(str(entry["name"]))
            densities.append(
                PiecewiseDensity(
                    (parse_rat(p["start"]), parse_rat(p["end"]), parse_rat(p["density"])) for p in entry["pieces"]
                )
            )
    except (KeyError, TypeError) as exc:
        raise InvalidInstance([f"malformed instance document: {exc}"]) from exc
    except ValueError as exc:
        raise InvalidInstance([str(exc)]) from exc
    instance = CakeInstance(tuple(names), tuple(densities), normalized)
    return instance


def instance_to_dict(instance: CakeInstance) -> dict:
    return {
        "normalized": instance.normalized,
        "agents": [
            {
                "name": name,
                "pieces": [
                    {"start": format_rat(s), "end": format_rat(e), "density": format_rat(d)}
                    for s, e, d in density.pieces
                ],
            }
            for name, density in zip(instance.names, instance.densities)
        ],
    }


def load_instance(path, validate: bool = True) -> CakeInstance:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidInstance([f"invalid JSON: {exc}"]) from exc
    instance = instance_from_dict(data)
    if validate:
        problems = validate_instance(instance)
        if problems:
            raise InvalidInstance(problems)
    return instance


def dump_instance(instance: CakeInstance, path=None) -> str:
    text = json.dumps(instance_to_dict(instance), indent=2) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
