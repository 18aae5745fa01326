"""Work budgets for the exponential-size searches."""
from __future__ import annotations

import os

ENV_VAR = "CAKECUT_BUDGET"
DEFAULT_BUDGET = 20_000_000


class BudgetExceeded(RuntimeError):
    """A search would exceed its configured size; ``required`` is the size it needed."""

    def __init__(self, what: str, required, budget):
        super().__init__(f"{what}: requires {required}, budget is {budget}")
        self.what = what
        self.required = required
        self.budget = budget


def default_budget() -> int:
    raw = os.environ.get(ENV_VAR)
    if raw:
        return int(raw)
    return DEFAULT_BUDGET
