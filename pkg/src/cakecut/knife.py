"""Moving-knife algorithm for approximately envy-free connected divisions.

The loop keeps a partial allocation in which every agent envies every other
assigned piece by at most ``eps / n**2`` (additively).  While some agent values
an unassigned gap more than its own piece plus that slack, the agents that
would like the gap race a knife across it; the first knife to reach the
agent's current value plus ``eps / n**2`` wins, and the winner trades its old
piece for the prefix it cut.  At exit each gap is merged into an adjacent
piece.

``alg_three_ef`` always cuts from the left end of the gap and yields a
``(3 + 9 eps / n)``-EF allocation.  ``alg_two_ef`` cuts from the right end
whenever the left cut would leave ``n + 1`` gaps, so merging absorbs at most
one gap per agent and the output is ``(2 + 9 eps / n)``-EF.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .allocation import Allocation, PartialAllocation, unassigned_gaps
from .model import CakeInstance, Interval, cut_query, rightmost_cut_query

__all__ = [
    "KnifeError",
    "IterationRecord",
    "KnifeState",
    "initial_state",
    "find_violation",
    "left_knife_step",
    "right_knife_step",
    "merge_step",
    "alg_three_ef",
    "alg_two_ef",
    "cut_and_choose",
    "trace_to_jsonl",
]

log = logging.getLogger(__name__)


class KnifeError(RuntimeError):
    """An internal guarantee of the algorithm failed; this indicates a bug."""


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    chosen_gap: Interval
    contenders: tuple[int, ...]
    direction: str
    selected_agent: int
    new_interval: Interval
    relinquished: Optional[Interval]

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "gap": self.chosen_gap.to_json(),
            "contenders": list(self.contenders),
            "direction": self.direction,
            "agent": self.selected_agent,
            "new": self.new_interval.to_json(),
            "relinquished": None if self.relinquished is None else self.relinquished.to_json(),
        }


@dataclass(frozen=True)
class KnifeState:
    partial: PartialAllocation
    epsilon: Fraction
    own: tuple[Fraction, ...]
    iteration: int = 0
    trace: tuple[IterationRecord, ...] = field(default=(), repr=False)

    @property
    def slack(self) -> Fraction:
        n = self.partial.n
        return self.epsilon / (n * n)

    @property
    def gaps(self) -> list[Interval]:
        return unassigned_gaps(self.partial)


def _check_epsilon(epsilon) -> Fraction:
    if isinstance(epsilon, float):
        raise TypeError("epsilon must be rational (Fraction or int), not float")
    epsilon = Fraction(epsilon)
    if not 0 < epsilon <= Fraction(1, 3):
        raise ValueError(f"epsilon must lie in (0, 1/3], got {epsilon}")
    return epsilon


def initial_state(instance: CakeInstance, epsilon) -> KnifeState:
    epsilon = _check_epsilon(epsilon)
    if instance.n < 1:
        raise ValueError("need at least one agent")
    return KnifeState(PartialAllocation.empty(instance.n), epsilon, (Fraction(0),) * instance.n)


def find_violation(instance: CakeInstance, state: KnifeState) -> tuple[int, Interval] | None:
    """First (agent, gap) with ``v(own) < v(gap) - eps/n^2``; gaps scanned left to right."""
    slack = state.slack
    for gap in state.gaps:
        for a in range(instance.n):
            if state.own[a] < instance.value(a, gap) - slack:
                return a, gap
    return None


def _contenders(instance: CakeInstance, state: KnifeState, gap: Interval) -> list[int]:
    slack = state.slack
    return [b for b in range(instance.n) if state.own[b] < instance.value(b, gap) - slack]


def _assign(state: KnifeState, gap: Interval, contenders, direction: str, agent: int,
            new: Interval, value: Fraction) -> KnifeState:
    old = state.partial[agent]
    own = list(state.own)
    own[agent] = value
    record = IterationRecord(
        iteration=state.iteration + 1,
        chosen_gap=gap,
        contenders=tuple(contenders),
        direction=direction,
        selected_agent=agent,
        new_interval=new,
        relinquished=old,
    )
    return KnifeState(
        partial=state.partial.replace(agent, new),
        epsilon=state.epsilon,
        own=tuple(own),
        iteration=state.iteration + 1,
        trace=state.trace + (record,),
    )


def left_knife_step(instance: CakeInstance, state: KnifeState, gap: Interval) -> KnifeState:
    contenders = _contenders(instance, state, gap)
    if not contenders:
        raise KnifeError(f"no agent violates on gap {gap}")
    slack = state.slack
    cuts = {b: cut_query(instance, b, gap.left, state.own[b] + slack) for b in contenders}
    winner = min(contenders, key=lambda b: (cuts[b], b))
    new = Interval(gap.left, cuts[winner])
    return _assign(state, gap, contenders, "left", winner, new, state.own[winner] + slack)


def right_knife_step(instance: CakeInstance, state: KnifeState, gap: Interval) -> KnifeState:
    contenders = _contenders(instance, state, gap)
    if not contenders:
        raise KnifeError(f"no agent violates on gap {gap}")
    slack = state.slack
    cuts = {b: rightmost_cut_query(instance, b, gap.right, state.own[b] + slack) for b in contenders}
    winner = min(contenders, key=lambda b: (-cuts[b], b))
    new = Interval(cuts[winner], gap.right)
    return _assign(state, gap, contenders, "right", winner, new, state.own[winner] + slack)


def merge_step(instance: CakeInstance, partial: PartialAllocation,
               gaps: list[Interval] | None = None) -> Allocation:
    """Join every gap to an adjacent assigned piece.

    If the cake starts with an assigned piece, gaps join their left
    neighbour.  Otherwise gaps to the left of the first pair of adjacent
    pieces join their right neighbour and the rest join their left
    neighbour; with no adjacent pair, all join the right neighbour except a
    trailing gap.  When there are at most as many gaps as pieces this gives
    each piece at most one gap.
    """
    if gaps is None:
        gaps = unassigned_gaps(partial)
    pieces = partial.pieces()
    if not pieces:
        raise KnifeError("cannot merge gaps into an empty partial allocation")
    if not gaps:
        return Allocation(partial.intervals, partial.length)

    if pieces[0][0].left == 0:
        pivot = Fraction(0)
    else:
        pivot = partial.length
        for (iv0, _), (iv1, _) in zip(pieces, pieces[1:]):
            if iv0.right == iv1.left:
                pivot = iv0.right
                break

    lefts = {iv.left: a for iv, a in pieces}
    rights = {iv.right: a for iv, a in pieces}
    extent = {a: [iv.left, iv.right] for iv, a in pieces}
    for gap in gaps:
        go_right = gap.right <= pivot and gap.right in lefts
        if not go_right and gap.left not in rights:
            go_right = True
        if go_right:
            a = lefts[gap.right]
            extent[a][0] = min(extent[a][0], gap.left)
        else:
            a = rights[gap.left]
            extent[a][1] = max(extent[a][1], gap.right)
    ivs = list(partial.intervals)
    for a, (lo, hi) in extent.items():
        ivs[a] = Interval(lo, hi)
    return Allocation(tuple(ivs), partial.length)


def _iteration_budget(n: int, epsilon: Fraction) -> int:
    return int(n ** 3 / epsilon)


def _run(instance: CakeInstance, epsilon, protect_gaps: bool) -> tuple[Allocation, KnifeState]:
    state = initial_state(instance, epsilon)
    n = instance.n
    budget = _iteration_budget(n, state.epsilon)
    while True:
        hit = find_violation(instance, state)
        if hit is None:
            break
        if state.iteration >= budget:
            raise KnifeError(f"iteration budget {budget} exhausted")
        _, gap = hit
        nxt = left_knife_step(instance, state, gap)
        if protect_gaps and len(nxt.gaps) > n:
            # Only the winner's piece moved, so the left cut can fail only when
            # the winner owned the piece just left of the gap; the right cut
            # then keeps every structure that forced <= n gaps before.
            nxt = right_knife_step(instance, state, gap)
            if len(nxt.gaps) > n:
                raise KnifeError(f"both knife directions leave more than {n} gaps on {gap}")
        state = nxt
    log.debug("knife loop finished after %d iterations", state.iteration)
    return merge_step(instance, state.partial, state.gaps), state


def alg_three_ef(instance: CakeInstance, epsilon) -> tuple[Allocation, KnifeState]:
    """Left-knife loop plus merge: a ``(3 + 9 eps / n)``-EF allocation and the final loop state."""
    return _run(instance, epsilon, protect_gaps=False)


def alg_two_ef(instance: CakeInstance, epsilon, use_cut_and_choose: bool = False) -> tuple[Allocation, KnifeState]:
    """Gap-protected loop: a ``(2 + 9 eps / n)``-EF allocation and the final loop state.

    With ``use_cut_and_choose`` and two agents the exactly envy-free
    cut-and-choose division is returned instead (the state then has no trace).
    """
    if instance.n < 2:
        raise ValueError("the gap-protected variant needs at least two agents")
    if use_cut_and_choose and instance.n == 2:
        alloc = cut_and_choose(instance)
        state = initial_state(instance, epsilon)
        return alloc, KnifeState(PartialAllocation(alloc.intervals), state.epsilon,
                                 tuple(instance.value(a, alloc[a]) for a in range(2)))
    return _run(instance, epsilon, protect_gaps=True)


def cut_and_choose(instance: CakeInstance) -> Allocation:
    """Exactly envy-free division for two agents: agent 0 halves, agent 1 picks."""
    if instance.n != 2:
        raise ValueError("cut-and-choose needs exactly two agents")
    half = instance.densities[0].total / 2
    x = cut_query(instance, 0, Fraction(0), half)
    left, right = Interval(0, x), Interval(x, instance.length)
    if instance.value(1, left) > instance.value(1, right):
        return Allocation((right, left), instance.length)
    return Allocation((left, right), instance.length)


def trace_to_jsonl(trace) -> str:
    return "".join(json.dumps(rec.to_dict()) + "\n" for rec in trace)
