import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cakecut.allocation import rho_power_sum, values
from cakecut.budget import BudgetExceeded
from cakecut.compare import geq, rat_pow, to_mpf
from cakecut.generate import random_instance, random_jisp
from cakecut.jisp import (
    Candidate,
    CutSet,
    GridJisp,
    JispInstance,
    brute_force_jisp,
    build_cut_set,
    compute_delta,
    discretize,
    inscribed_cells,
    local_ratio_solve,
    maximize_rho_mean,
    min_epsilon_for_budget,
    solution_to_partial,
)
from cakecut.model import CakeInstance, Interval
from cakecut.oracle import check_rho_mean_theorem, grid_optimal

from .conftest import disjoint_pair, uniform

F = Fraction


def jisp(*jobs):
    return JispInstance([[Candidate(l, r, F(w)) for l, r, w in job] for job in jobs])


def feasible(sol, n_jobs):
    chosen = [iv for iv in sol.selected if iv is not None]
    assert len(sol.selected) == n_jobs
    for i, a in enumerate(chosen):
        for b in chosen[i + 1:]:
            assert a[1] <= b[0] or b[1] <= a[0]
    return True


# ---- cut sets ------------------------------------------------------------------

def test_cut_set_two_uniform():
    cuts = build_cut_set(uniform(2), 1, 1)
    assert cuts.delta == F(1, 4)
    assert cuts.cell_mass == F(1, 16)
    assert list(cuts.points) == [F(k, 16) for k in range(17)]


def test_cut_set_single_uniform():
    cuts = build_cut_set(uniform(1), 1, 1)
    assert list(cuts.points) == [0, F(1, 2), 1]


def test_delta_exact_and_rounded():
    assert compute_delta(2, F(1, 2), F(1, 2)) == F(1, 64)
    d = compute_delta(2, F(2, 3), F(1, 2))  # (1/8)^(3/2) is irrational
    with mpmath.workprec(256):
        true = mpmath.power(mpmath.mpf(1) / 8, mpmath.mpf(3) / 2)
        assert to_mpf(d) <= true
        assert true - to_mpf(d) < true * mpmath.mpf(2) ** -60


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10 ** 6), st.sampled_from([F(1), F(1, 2)]),
       st.sampled_from([F(1), F(1, 2), F(1, 3)]))
def test_cell_bound(n, seed, rho, eps):
    inst = random_instance(n, 5, seed)
    cuts = build_cut_set(inst, rho, eps, max_points=10 ** 5)
    bound = cuts.delta * eps / (2 * n)
    assert cuts.points[0] == 0 and cuts.points[-1] == 1
    for x, y in zip(cuts.points, cuts.points[1:]):
        assert x < y
        for a in range(n):
            assert inst.value(a, Interval(x, y)) <= bound


def test_cut_set_budget():
    with pytest.raises(BudgetExceeded) as err:
        build_cut_set(uniform(2), F(1, 2), F(1, 100), max_points=1000)
    assert err.value.required > 1000
    eps = min_epsilon_for_budget(2, F(1, 2), 1000)
    assert 0 < eps < 1
    fits = build_cut_set(uniform(2), F(1, 2), F(eps).limit_denominator(1000) + F(1, 1000), max_points=1000)
    assert len(fits) <= 1000


# ---- discretisation --------------------------------------------------------------

def test_discretize_counts_and_weights():
    cuts, grid = discretize(uniform(2), 1, 1)
    assert grid.n_jobs == 2
    assert grid.n_candidates() == 2 * 136
    assert grid.weight(0, (0, 8)) == F(1, 2)
    explicit = grid.to_explicit()
    assert explicit.n_candidates() == 272
    assert explicit.weight(1, (0, 8)) == F(1, 2)


def test_zero_value_weight():
    cuts, grid = discretize(disjoint_pair(), 1, 1)
    right_half = cuts.points.index(F(1, 2))
    assert grid.weight(0, (right_half, len(cuts) - 1)) == 0


def test_solution_to_partial_lookup():
    cuts, _ = discretize(uniform(2), 1, 1)
    from cakecut.jisp import JispSolution
    p = solution_to_partial(uniform(2), cuts, JispSolution(((0, 8), None), F(1, 2)))
    assert p[0] == Interval(0, F(1, 2)) and p[1] is None
    empty = solution_to_partial(uniform(2), cuts, JispSolution((None, None), F(0)))
    assert empty.intervals == (None, None)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 3), st.integers(0, 10 ** 6), st.sampled_from([F(1), F(1, 2)]))
def test_mapping_preserves_power_sum(n, seed, rho):
    inst = random_instance(n, 4, seed)
    cuts, grid = discretize(inst, rho, F(1))
    sol = local_ratio_solve(grid)
    partial = solution_to_partial(inst, cuts, sol)
    mapped = rho_power_sum(values(inst, partial), rho)
    assert mapped == sol.weight
    if rho == 1:
        assert isinstance(mapped, Fraction)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 10 ** 6), st.sampled_from([F(1), F(1, 2)]),
       st.fractions(0, 1, max_denominator=60), st.fractions(0, 1, max_denominator=60))
def test_inscribed_value_loss(n, seed, rho, x, y):
    inst = random_instance(n, 5, seed)
    eps = F(1, 2)
    cuts = build_cut_set(inst, rho, eps)
    iv = Interval(min(x, y), max(x, y))
    inner = inscribed_cells(cuts, iv)
    loss_bound = cuts.delta * eps / n
    for a in range(n):
        kept = inst.value(a, cuts.interval(*inner)) if inner else 0
        assert inst.value(a, iv) - kept <= loss_bound


# ---- local ratio vs brute force -------------------------------------------------------

def test_worked_instance_one():
    inst = jisp([(0, 1, 3)], [(0, 1, 2)])
    for solver in (local_ratio_solve, brute_force_jisp):
        sol = solver(inst)
        assert sol.weight == 3
        assert sol.selected == ((0, 1), None)


def test_worked_instance_two():
    inst = jisp([(0, F(1, 2), 2)], [(0, 1, 3)], [(F(1, 2), 1, 2)])
    for solver in (local_ratio_solve, brute_force_jisp):
        sol = solver(inst)
        assert sol.weight == 4
        assert sol.selected == ((0, F(1, 2)), None, (F(1, 2), 1))


def test_empty_instance():
    assert local_ratio_solve(JispInstance([])).weight == 0
    assert brute_force_jisp(JispInstance([])).weight == 0


def test_single_candidate():
    sol = brute_force_jisp(jisp([(2, 5, 7)]))
    assert sol.selected == ((2, 5),) and sol.weight == 7


def test_brute_force_cap():
    rng = random.Random(0)
    big = random_jisp(rng, 5, 12, span=40)
    with pytest.raises(BudgetExceeded):
        brute_force_jisp(big, cap=5)


def test_invalid_candidates():
    with pytest.raises(ValueError):
        jisp([(3, 3, 1)])
    with pytest.raises(ValueError):
        jisp([(0, 1, -1)])


def test_json_roundtrip():
    inst = jisp([(0, 2, "5/2")], [(1, 3, 1)])
    again = JispInstance.loads(inst.dumps())
    assert again.to_dict() == inst.to_dict()
    assert again.to_dict()["jobs"][0][0] == {"l": 0, "r": 2, "w": "5/2"}


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(1, 4), st.integers(1, 6))
def test_two_approximation(seed, jobs, per_job):
    inst = random_jisp(random.Random(seed), jobs, per_job)
    lr = local_ratio_solve(inst)
    opt = brute_force_jisp(inst)
    assert feasible(lr, jobs) and feasible(opt, jobs)
    assert 2 * lr.weight >= opt.weight
    assert lr.weight <= opt.weight


def test_grid_solver_matches_literal_schedule():
    for seed in range(6):
        inst = random_instance(2, 3, seed)
        for rho in (F(1), F(1, 2)):
            cuts, grid = discretize(inst, rho, F(1))
            fast = local_ratio_solve(grid)
            slow = local_ratio_solve(grid.to_explicit())
            assert fast.selected == slow.selected


def test_grid_solver_within_factor_two_of_oracle():
    inst = random_instance(2, 2, 4)
    cuts = CutSet(tuple(F(k, 4) for k in range(5)), F(1), F(1))
    grid = GridJisp(inst, cuts, 1)
    assert 2 * local_ratio_solve(grid).weight >= brute_force_jisp(grid, cap=30).weight


# ---- end-to-end rho-mean ---------------------------------------------------------------

def test_uniform_pair_rho_one():
    inst = uniform(2)
    alloc, report = maximize_rho_mean(inst, 1, F(1, 2))
    _, oracle = grid_optimal(inst, "sw", F(1, 16))
    assert check_rho_mean_theorem(inst, alloc, 1, F(1, 2), oracle).passed


def test_disjoint_pair_rho_one():
    inst = disjoint_pair()
    alloc, report = maximize_rho_mean(inst, 1, F(1, 2))
    _, oracle = grid_optimal(inst, "sw", F(1, 16))
    assert oracle.sw == 1
    with mpmath.workprec(256):
        assert geq(report.sw, 1 / (2 + mpmath.e / 2))


def test_rho_mean_rejects_unnormalized():
    inst = CakeInstance.from_densities(uniform(1).densities, normalized=False)
    with pytest.raises(ValueError):
        maximize_rho_mean(inst, 1, F(1, 2))


def test_rho_mean_rejects_epsilon_one():
    with pytest.raises(ValueError):
        maximize_rho_mean(uniform(2), 1, 1)


def test_weights_follow_power_rule():
    inst = random_instance(2, 3, 9)
    cuts, grid = discretize(inst, F(1, 2), F(1))
    for l, r in [(0, 1), (0, len(cuts) - 1), (1, 3)]:
        v = inst.value(1, cuts.interval(l, r))
        assert grid.weight(1, (l, r)) == rat_pow(v, F(1, 2))
