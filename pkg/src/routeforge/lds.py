"""Limited-discrepancy search over the greedy insertion sequence.

The greedy builder commits every customer to its cheapest slot. Here a
customer whose best and second-best routes cost nearly the same (within
the threshold l) becomes a branch point: one child follows the greedy
choice, the other takes the second route. A path may branch at most n
times, so at most 2^n leaves are built; depth-first, best child first.
"""

from __future__ import annotations

from dataclasses import dataclass

from .localopt import _reconstruct, apply_ilo, static_order
from .solution import (EPS, NoFeasibleInsertion, Solution, apply_insertion,
                       objective, plan_push)


@dataclass(frozen=True)
class LdsParams:
    i: int  # ILO level of the underlying builder
    n: int  # max branch points per root-to-leaf path
    l: float  # branching threshold on the delta gap

    def __post_init__(self):
        if self.i not in (0, 1, 2, 3, 4):
            raise ValueError(f"ILO level must be 0..4, got {self.i}")
        if self.n < 0 or self.l < 0:
            raise ValueError("discrepancy budget and threshold must be >= 0")


def _insert_leg(inst, sol, ctx, cust, p, budget):
    """One customer step; returns the alternative child or None.

    The greedy choice is applied to `sol` in place. When the second-best
    route is within the threshold and budget remains, a clone taking that
    route is returned (the caller owns scheduling it).
    """
    try:
        rep = plan_push(sol, cust, ctx)
    except NoFeasibleInsertion:
        if p.i == 4 and _reconstruct(inst, sol, ctx, cust):
            apply_ilo(inst, sol, ctx, cust, p.i)
        return None
    alt = None
    if (budget > 0 and rep.second_route is not None
            and rep.second_delta - rep.delta < p.l):
        alt = sol.clone()
        apply_insertion(alt, cust, rep.second_route, rep.second_position)
        apply_ilo(inst, alt, ctx, cust, p.i)
    apply_insertion(sol, cust, rep.route, rep.position)
    apply_ilo(inst, sol, ctx, cust, p.i)
    return alt


def lds_generate(inst, ctx, p: LdsParams, consumer, start: Solution | None = None):
    """Run the discrepancy search, feeding every leaf to `consumer`.

    `consumer(solution) -> solution` is the optimization continuation; it
    may mutate and return its argument. Returns the consumer output with
    the best objective (first found wins ties). With `start` given, only
    that partial solution's unassigned pool is inserted.
    """
    base = Solution(inst) if start is None else start
    order = static_order(inst, base.unassigned)
    best_val = None
    best_sol = None
    # stack of (solution, next order index, branch points used)
    stack = [(base, 0, 0)]
    while stack:
        sol, idx, used = stack.pop()
        while idx < len(order):
            cust = order[idx]
            budget = p.n - used
            alt = _insert_leg(inst, sol, ctx, cust, p, budget)
            if alt is not None:
                used += 1
                stack.append((alt, idx + 1, used))
            idx += 1
        leaf = consumer(sol)
        val = objective(inst, leaf, ctx)
        if best_val is None or val < best_val - EPS:
            best_val = val
            best_sol = leaf
    return best_sol


def lds_build(inst, ctx, p: LdsParams, start: Solution | None = None) -> Solution:
    """Best leaf of the discrepancy search, no post-optimization."""
    return lds_generate(inst, ctx, p, lambda s: s, start=start)
