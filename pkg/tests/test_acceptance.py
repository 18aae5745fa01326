"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import random
import time
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import mpmath

from cakecut.allocation import nsw_product, rho_power_sum, unassigned_gaps, values
from cakecut.compare import to_mpf
from cakecut.exhaustive import exhaustive_nsw
from cakecut.generate import random_instance, random_jisp
from cakecut.hardness import (
    build_nsw_instance,
    build_rho_instance,
    nsw_yes_bound,
    random_satisfiable_formula,
    yes_case_allocation,
)
from cakecut.jisp import (
    Candidate,
    JispInstance,
    brute_force_jisp,
    discretize,
    local_ratio_solve,
    maximize_rho_mean,
    solution_to_partial,
)
from cakecut.knife import alg_three_ef, alg_two_ef, trace_to_jsonl
from cakecut.model import Interval, validate_instance
from cakecut.oracle import (
    check_ef2,
    check_ef3,
    check_ef_nsw_theorem,
    check_exhaustive_nsw,
    check_nash_optimal_4ef,
    check_nsw3,
    check_price_of_ef,
    check_rho_mean_theorem,
    grid_optimal,
)

from .conftest import disjoint_pair, uniform

F = Fraction
DATA = Path(__file__).parent / "data"
EPSILONS = (F(1, 3), F(1, 5), F(1, 10))
CORPUS_SIZE = 210


@lru_cache(maxsize=None)
def corpus_entry(seed: int):
    """Deterministic corpus: n cycles through 2..6, epsilon through 1/3, 1/5, 1/10."""
    n = 2 + seed % 5
    return random_instance(n, 5, 1000 + seed), EPSILONS[seed % 3]


def corpus(max_n: int = 6, min_n: int = 2):
    for seed in range(CORPUS_SIZE):
        inst, eps = corpus_entry(seed)
        if min_n <= inst.n <= max_n:
            yield seed, inst, eps


@lru_cache(maxsize=None)
def knife_runs(seed: int):
    inst, eps = corpus_entry(seed)
    return alg_three_ef(inst, eps), alg_two_ef(inst, eps)


@lru_cache(maxsize=None)
def oracle(seed: int, welfare: str, resolution: Fraction, rho=None):
    inst, _ = corpus_entry(seed)
    return grid_optimal(inst, welfare, resolution, rho=rho)


def verdict(capsys, number: int, title: str, ok: bool, detail: str, elapsed: float, limit: float | None = None):
    timed_ok = limit is None or elapsed < limit
    status = "PASS" if ok and timed_ok else "FAIL"
    budget = f", limit {limit:.0f}s" if limit is not None else ""
    with capsys.disabled():
        print(f"\n[criterion {number:2d}] {status}: {title} -- {detail} ({elapsed:.1f}s{budget})")
    assert ok, detail
    assert timed_ok, f"took {elapsed:.1f}s, limit {limit}s"


def lemma5_holds(inst, partial, slack):
    for a in range(inst.n):
        own = inst.value(a, partial[a])
        for q in list(partial.intervals) + unassigned_gaps(partial):
            if own < inst.value(a, q) - slack:
                return False
    return True


def test_criterion_01_three_ef(capsys):
    start = time.time()
    failures, count = [], 0
    for seed, inst, eps in corpus():
        (alloc, state), _ = knife_runs(seed)
        n = inst.n
        count += 1
        if not check_ef3(inst, alloc, eps).passed:
            failures.append((seed, "envy"))
        if not lemma5_holds(inst, state.partial, eps / (n * n)):
            failures.append((seed, "lemma"))
        if state.iteration > n ** 3 / eps:
            failures.append((seed, "iterations"))
    verdict(capsys, 1, "envy <= 3 + 9eps/n, exit inequality, iteration bound",
            count >= 200 and not failures, f"{count} instances, failures {failures[:5]}", time.time() - start, 60)


def test_criterion_02_two_ef(capsys):
    start = time.time()
    failures, count = [], 0
    for seed, inst, eps in corpus():
        _, (alloc, state) = knife_runs(seed)
        count += 1
        if not check_ef2(inst, alloc, eps).passed:
            failures.append((seed, "envy"))
        if len(state.gaps) > inst.n:
            failures.append((seed, "gaps"))
    verdict(capsys, 2, "envy <= 2 + 9eps/n and at most n gaps at merge",
            count >= 200 and not failures, f"{count} instances, failures {failures[:5]}", time.time() - start, 90)


def test_criterion_03_nsw_three(capsys):
    start = time.time()
    failures, count = [], 0
    for seed, inst, eps in corpus(max_n=4):
        (alloc, _), _ = knife_runs(seed)
        count += 1
        if not check_nsw3(inst, alloc, oracle(seed, "nsw", F(1, 32))[1]).passed:
            failures.append(seed)
    verdict(capsys, 3, "NSW(ef3) >= grid NSW / (3 + 5/n), exact n-th powers",
            not failures, f"{count} instances, failures {failures[:5]}", time.time() - start, 300)


def test_criterion_04_ef_implies_nsw(capsys):
    start = time.time()
    failures, checked, skipped = [], 0, 0
    slow_solvers_left = {2: 8, 3: 8, 4: 4}
    for seed, inst, eps in corpus(max_n=4):
        (a3, _), (a2, _) = knife_runs(seed)
        produced = [("ef3", a3), ("ef2", a2)]
        if slow_solvers_left[inst.n] > 0:
            slow_solvers_left[inst.n] -= 1
            produced.append(("exhaustive", exhaustive_nsw(inst, 2)[0]))
            produced.append(("rho-mean", maximize_rho_mean(inst, 1, F(1, 2))[0]))
        oracle_report = oracle(seed, "nsw", F(1, 32))[1]
        for name, alloc in produced:
            v = check_ef_nsw_theorem(inst, alloc, oracle_report)
            if v.passed is None:
                skipped += 1
                continue
            checked += 1
            if not v.passed:
                failures.append((seed, name))
        nash_alloc, _ = oracle(seed, "nsw", F(1, 64))
        if not check_nash_optimal_4ef(inst, nash_alloc, F(1, 4)).passed:
            failures.append((seed, "4ef"))
    verdict(capsys, 4, "NSW >= grid NSW / (2 alpha); grid Nash optimum is (4 + 1/4)-EF (approximate)",
            not failures, f"{checked} allocations checked, {skipped} with infinite alpha, failures {failures[:5]}",
            time.time() - start)


def test_criterion_05_discretisation(capsys):
    start = time.time()
    failures, count = [], 0
    for seed, inst, _ in corpus(max_n=3):
        if seed >= 60:
            break
        for rho in (F(1), F(1, 2)):
            eps = F(1)
            cuts, grid = discretize(inst, rho, eps)
            bound = cuts.delta * eps / (2 * inst.n)
            for x, y in zip(cuts.points, cuts.points[1:]):
                if any(inst.value(a, Interval(x, y)) > bound for a in range(inst.n)):
                    failures.append((seed, rho, "cell"))
                    break
            sol = local_ratio_solve(grid)
            partial = solution_to_partial(inst, cuts, sol)
            mapped = rho_power_sum(values(inst, partial), rho)
            if mapped != sol.weight:
                failures.append((seed, rho, "mapping"))
            count += 1
    verdict(capsys, 5, "cell value <= delta eps / 2n; mapping keeps sum v^rho = w exactly",
            not failures, f"{count} cut sets, failures {failures[:5]}", time.time() - start)


def test_criterion_06_jisp_two_approx(capsys):
    start = time.time()
    rng = random.Random(2024)
    failures, count = [], 0
    while count < 520:
        inst = random_jisp(rng, rng.randint(1, 4), rng.randint(1, 6))
        lr, opt = local_ratio_solve(inst), brute_force_jisp(inst)
        if not 2 * lr.weight >= opt.weight:
            failures.append(count)
        count += 1
    one = JispInstance([[Candidate(0, 1, F(3))], [Candidate(0, 1, F(2))]])
    two = JispInstance([[Candidate(0, F(1, 2), F(2))], [Candidate(0, 1, F(3))], [Candidate(F(1, 2), 1, F(2))]])
    worked = (local_ratio_solve(one).weight, local_ratio_solve(two).weight)
    verdict(capsys, 6, "w(local ratio) >= w(brute force) / 2; worked weights 3 and 4",
            not failures and worked == (3, 4), f"{count} instances, worked {worked}, failures {failures[:5]}",
            time.time() - start, 60)


def test_criterion_07_rho_mean(capsys):
    start = time.time()
    eps = F(1, 2)
    failures, worst_ratio, count = [], mpmath.mpf(0), 0
    per_n_half = {2: 6, 3: 4}
    for seed, inst, _ in corpus(max_n=3):
        rhos = [F(1)]
        if per_n_half[inst.n] > 0:
            per_n_half[inst.n] -= 1
            rhos.append(F(1, 2))
        for rho in rhos:
            alloc, _ = maximize_rho_mean(inst, rho, eps)
            welfare = "sw" if rho == 1 else "rho"
            report = oracle(seed, welfare, F(1, 32), rho if rho != 1 else None)[1]
            v = check_rho_mean_theorem(inst, alloc, rho, eps, report)
            count += 1
            if not v.passed:
                failures.append((seed, rho))
            if rho == 1:
                ratio = to_mpf(report.sw) / to_mpf(sum(values(inst, alloc)) / inst.n)
                worst_ratio = max(worst_ratio, ratio)
                if not ratio < 8:
                    failures.append((seed, "factor 8"))
    verdict(capsys, 7, "M_rho >= (2 + 4 eps e / n)^(-1/rho) grid M_rho; rho = 1 beats factor 8",
            not failures, f"{count} runs, worst rho=1 ratio {mpmath.nstr(worst_ratio, 6)}, failures {failures[:5]}",
            time.time() - start)


def test_criterion_08_exhaustive(capsys):
    start = time.time()
    failures, count = [], 0
    for seed, inst, _ in corpus(max_n=3):
        if seed >= 40:
            break
        report = oracle(seed, "nsw", F(1, 32))[1]
        for alpha in (F(3, 2), F(2)):
            alloc, _ = exhaustive_nsw(inst, alpha)
            count += 1
            if not check_exhaustive_nsw(inst, alloc, alpha, report).passed:
                failures.append((seed, alpha))
    _, uni = exhaustive_nsw(uniform(2), 2)
    verdict(capsys, 8, "NSW(exhaustive) >= grid NSW / alpha; two uniform agents reach NSW 1/2",
            not failures and uni.nsw_product == F(1, 4),
            f"{count} runs, uniform pair NSW^2 = {uni.nsw_product}, failures {failures[:5]}", time.time() - start)


def test_criterion_09_hardness(capsys):
    start = time.time()
    rng = random.Random(99)
    failures = []
    for k in range(20):
        r = rng.randint(2, 6)
        phi, truth = random_satisfiable_formula(r, rng.randint(r, 2 * r), rng)
        m = phi.num_clauses
        inst, layout = build_nsw_instance(phi)
        if inst.n != 3 * r + m + 1 or validate_instance(inst):
            failures.append((k, "shape"))
        cells = [layout.unit_cell(i, c) for i in range(1, r + 1) for c in range(1, 15)]
        if any(sum(1 for a in range(inst.n) if inst.value(a, cell) > 0) > 1 for cell in cells):
            failures.append((k, "cell owners"))
        alloc = yes_case_allocation(layout, phi, truth)
        if not nsw_product(inst, alloc) >= nsw_yes_bound(r, m):
            failures.append((k, "yes bound"))
        rinst, rlayout = build_rho_instance(phi, F(1, 2))
        if rinst.n != 3 * r + m:
            failures.append((k, "rho shape"))
        for role in rlayout.roles:
            a, b = layout.agent(role), rlayout.agent(role)
            for i in range(1, r + 1):
                for c in range(1, 15):
                    if rinst.value(b, rlayout.unit_cell(i, c)) != inst.value(a, layout.unit_cell(i, c)) ** 2:
                        failures.append((k, "power rule", role))
    verdict(capsys, 9, "gadget shape, single owner per cell, yes-case NSW^(3r+m+1) >= 2^-r 3^-m, rho=1/2 cells",
            not failures, f"20 formulas, failures {failures[:5]}", time.time() - start)


def test_criterion_10_price_of_envy_freeness(capsys):
    start = time.time()
    failures, checked = [], 0
    for seed, inst, eps in corpus(max_n=4):
        (alloc, _), _ = knife_runs(seed)
        for rho in (F(1), F(1, 2)):
            welfare = "sw" if rho == 1 else "rho"
            report = oracle(seed, welfare, F(1, 32), rho if rho != 1 else None)[1]
            v = check_price_of_ef(inst, alloc, rho, report)
            if v.passed is None:
                continue
            checked += 1
            if not v.passed:
                failures.append((seed, rho))
    verdict(capsys, 10, "grid M_rho <= 2 alpha 2^(1/rho) n^(rho/(rho+1)) M_rho(ef3 output)",
            not failures, f"{checked} checks, failures {failures[:5]}", time.time() - start)


def test_criterion_11_golden_trace(capsys):
    start = time.time()
    alloc, state = alg_three_ef(disjoint_pair(), F(1, 3))
    same_trace = trace_to_jsonl(state.trace) == (DATA / "golden_trace.jsonl").read_text()
    same_alloc = alloc.intervals == (Interval(0, F(11, 24)), Interval(F(11, 24), 1))
    verdict(capsys, 11, "golden trace and final allocation [0, 11/24], [11/24, 1]",
            same_trace and same_alloc, f"{len(state.trace)} iterations, trace match {same_trace}",
            time.time() - start)
