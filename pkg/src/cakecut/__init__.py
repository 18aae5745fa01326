"""Connected cake division: approximately envy-free and welfare-maximizing allocations.

Everything is exact rational arithmetic on piecewise-constant valuations;
irrational welfare figures go through :mod:`cakecut.compare`.
"""
from .allocation import (
    Allocation,
    PartialAllocation,
    WelfareReport,
    complete_allocation,
    envy_ratio,
    nsw,
    rho_mean,
    sw,
    unassigned_gaps,
    welfare_report,
)
from .budget import BudgetExceeded
from .exhaustive import exhaustive_nsw
from .jisp import local_ratio_solve, maximize_rho_mean
from .knife import alg_three_ef, alg_two_ef
from .model import CakeInstance, Interval, PiecewiseDensity, cut_query, eval_query, load_instance
from .oracle import grid_optimal

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "PartialAllocation",
    "WelfareReport",
    "CakeInstance",
    "Interval",
    "PiecewiseDensity",
    "BudgetExceeded",
    "alg_three_ef",
    "alg_two_ef",
    "complete_allocation",
    "cut_query",
    "envy_ratio",
    "eval_query",
    "exhaustive_nsw",
    "grid_optimal",
    "load_instance",
    "local_ratio_solve",
    "maximize_rho_mean",
    "nsw",
    "rho_mean",
    "sw",
    "unassigned_gaps",
    "welfare_report",
]
