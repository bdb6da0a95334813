"""Allocation guard for lattice sweeps.

Dense slabs over (2n+1)^d boxes can silently explode; every op checks its
slab size against a cell budget and raises instead of truncating.
"""

DEFAULT_CELL_BUDGET = 200_000_000


class BudgetError(RuntimeError):
    """A sweep would allocate more cells than the configured budget."""


def check_cells(cells, budget=None, what="slab"):
    limit = DEFAULT_CELL_BUDGET if budget is None else budget
    if cells > limit:
        raise BudgetError(f"{what} needs {cells} cells, budget is {limit}")
    return cells
