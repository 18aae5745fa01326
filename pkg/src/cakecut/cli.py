"""Command-line front end: ``cakecut solve | gen | verify``.

Exit codes: 0 success, 1 a checked property failed, 2 usage or validation
error, 3 a size budget was exceeded.  Every numeric flag is a rational
string such as ``1/3``.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from fractions import Fraction

from . import __version__
from .allocation import InvalidAllocation, dump_allocation, load_allocation, welfare_report
from .budget import ENV_VAR, BudgetExceeded, default_budget
from .exhaustive import exhaustive_nsw
from .generate import random_instance
from .hardness import (
    InvalidFormula,
    build_nsw_instance,
    build_rho_instance,
    eliminate_pure_literals,
    nsw_yes_bound,
    read_dimacs,
)
from .jisp import DEFAULT_MAX_POINTS, maximize_rho_mean, min_epsilon_for_budget
from .knife import alg_three_ef, alg_two_ef, trace_to_jsonl
from .model import InvalidInstance, dump_instance, format_rat, load_instance, parse_rat
from .oracle import (
    check_ef2,
    check_ef3,
    check_ef_nsw_theorem,
    check_nash_optimal_4ef,
    check_nsw3,
    check_price_of_ef,
    grid_optimal,
)

log = logging.getLogger("cakecut")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3
THEOREMS = ("ef3", "ef2", "nsw3", "efnsw", "price", "4ef")


def _rational(text: str) -> Fraction:
    try:
        return parse_rat(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _budget(args) -> int:
    return args.budget if args.budget is not None else default_budget()


def cmd_solve(args) -> int:
    instance = load_instance(args.instance)
    summary: dict = {"algo": args.algo}
    trace = None
    if args.algo in ("ef3", "ef2"):
        eps = args.epsilon if args.epsilon is not None else Fraction(1, 3)
        if args.algo == "ef3":
            alloc, state = alg_three_ef(instance, eps)
        else:
            alloc, state = alg_two_ef(instance, eps, use_cut_and_choose=args.cut_and_choose)
        trace = state.trace
        summary.update({"epsilon": format_rat(eps), "iterations": state.iteration,
                        "gaps_at_merge": len(state.gaps), "agents": instance.n})
        report = welfare_report(instance, alloc)
    elif args.algo == "nsw-exhaustive":
        alpha = args.alpha if args.alpha is not None else Fraction(2)
        alloc, report = exhaustive_nsw(instance, alpha, _budget(args))
        summary["alpha"] = format_rat(alpha)
    else:
        rho = args.rho if args.rho is not None else Fraction(1)
        eps = args.epsilon if args.epsilon is not None else Fraction(1, 2)
        points = args.max_points
        try:
            alloc, report = maximize_rho_mean(instance, rho, eps, points)
        except BudgetExceeded:
            floor = min_epsilon_for_budget(instance.n, rho, points)
            log.error("cut set too large for %d points; epsilon >= %.6g fits", points, floor)
            raise
        summary.update({"rho": format_rat(rho), "epsilon": format_rat(eps)})
    if args.trace is not None:
        _emit(trace_to_jsonl(trace or ()), args.trace)
    doc = json.loads(dump_allocation(instance, alloc, report))
    doc["summary"] = summary
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.kind == "random":
        if args.agents is None:
            raise InvalidInstance(["gen random needs --agents"])
        instance = random_instance(args.agents, args.pieces, args.seed)
        _emit(dump_instance(instance), args.out)
        return EXIT_OK
    if args.cnf is None:
        raise InvalidFormula([f"gen {args.kind} needs --cnf"])
    formula = read_dimacs(args.cnf)
    extra: dict = {}
    if args.pure_literals:
        formula, fixed, used = eliminate_pure_literals(formula)
        extra["preprocessed"] = {"fixed": {str(k): v for k, v in sorted(fixed.items())},
                                 "variable_map": {str(i + 1): old for i, old in enumerate(used)}}
    if args.kind == "hardness-nsw":
        instance, layout = build_nsw_instance(formula)
        extra["yes_bound_nsw_power"] = format_rat(nsw_yes_bound(formula.num_vars, formula.num_clauses))
    else:
        rho = args.rho if args.rho is not None else Fraction(1, 2)
        instance, layout = build_rho_instance(formula, rho)
        extra["rho"] = format_rat(rho)
    _emit(dump_instance(instance), args.out)
    layout_path = args.layout or (f"{args.out}.layout.json" if args.out else None)
    if layout_path:
        side = layout.to_dict()
        side.update(extra)
        with open(layout_path, "w") as fh:
            fh.write(json.dumps(side, indent=2) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    instance = load_instance(args.instance)
    alloc = load_allocation(instance, args.allocation)
    theorems = args.theorem or ["efnsw"]
    eps = args.epsilon if args.epsilon is not None else Fraction(1, 3)
    budget = _budget(args)
    oracle_cache: dict = {}

    def oracle(welfare: str, resolution, rho=None):
        key = (welfare, resolution, rho)
        if key not in oracle_cache:
            oracle_cache[key] = grid_optimal(instance, welfare, resolution, rho=rho, budget=budget)
        return oracle_cache[key]

    res = args.resolution if args.resolution is not None else Fraction(1, 32)
    verdicts = []
    for name in theorems:
        if name == "ef3":
            verdicts.append(check_ef3(instance, alloc, eps))
        elif name == "ef2":
            verdicts.append(check_ef2(instance, alloc, eps))
        elif name == "nsw3":
            verdicts.append(check_nsw3(instance, alloc, oracle("nsw", res)[1]))
        elif name == "efnsw":
            verdicts.append(check_ef_nsw_theorem(instance, alloc, oracle("nsw", res)[1]))
        elif name == "price":
            rho = args.rho if args.rho is not None else Fraction(1)
            welfare = "sw" if rho == 1 else "rho"
            verdicts.append(check_price_of_ef(instance, alloc, rho, oracle(welfare, res, rho if rho != 1 else None)[1]))
        elif name == "4ef":
            fine = args.resolution if args.resolution is not None else Fraction(1, 64)
            slack = args.slack if args.slack is not None else Fraction(1, 4)
            verdicts.append(check_nash_optimal_4ef(instance, oracle("nsw", fine)[0], slack))
    out = {"verdicts": [v.to_dict() for v in verdicts]}
    sys.stdout.write(json.dumps(out, indent=2) + "\n")
    return EXIT_FAIL if any(v.passed is False for v in verdicts) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cakecut", description="Connected cake division solvers and checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    parser.add_argument("--budget", type=int, default=None,
                        help=f"work budget for exhaustive searches (default ${ENV_VAR} or 2e7)")
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="compute an allocation")
    solve.add_argument("--algo", required=True, choices=["ef3", "ef2", "nsw-exhaustive", "rho-mean"])
    solve.add_argument("--instance", required=True)
    solve.add_argument("--epsilon", type=_rational)
    solve.add_argument("--alpha", type=_rational)
    solve.add_argument("--rho", type=_rational)
    solve.add_argument("--trace", help="write the knife iterations as JSON lines")
    solve.add_argument("--out", help="output file (default stdout)")
    solve.add_argument("--cut-and-choose", action="store_true", help="ef2 with two agents: exact cut-and-choose")
    solve.add_argument("--max-points", type=int, default=DEFAULT_MAX_POINTS, help="cut-set size limit for rho-mean")
    solve.set_defaults(func=cmd_solve)

    gen = sub.add_parser("gen", help="generate an instance")
    gen.add_argument("kind", choices=["hardness-nsw", "hardness-rho", "random"])
    gen.add_argument("--cnf", help="DIMACS formula for the hardness gadgets")
    gen.add_argument("--rho", type=_rational)
    gen.add_argument("--agents", type=int)
    gen.add_argument("--pieces", type=int, default=5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", help="instance file (default stdout)")
    gen.add_argument("--layout", help="layout sidecar file (default OUT.layout.json)")
    gen.add_argument("--pure-literals", action="store_true",
                     help="drop pure literals first so every variable occurs with both signs")
    gen.set_defaults(func=cmd_gen)

    verify = sub.add_parser("verify", help="check an allocation against the bounds")
    verify.add_argument("--instance", required=True)
    verify.add_argument("--allocation", required=True)
    verify.add_argument("--theorem", action="append", choices=THEOREMS, help="repeatable; default efnsw")
    verify.add_argument("--resolution", type=_rational)
    verify.add_argument("--epsilon", type=_rational, help="epsilon the allocation was computed with (default 1/3)")
    verify.add_argument("--rho", type=_rational)
    verify.add_argument("--slack", type=_rational)
    verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InvalidInstance, InvalidFormula) as exc:
        print("invalid input:", file=sys.stderr)
        for v in exc.violations:
            print(f"  {v}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidAllocation, ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
