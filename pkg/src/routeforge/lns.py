"""Large-neighborhood search: remove a related cluster, rebuild, keep wins.

Removal uses Shaw's relatedness bias so the freed customers are close
together (and preferably co-routed), which is what gives the rebuild a
real chance to re-route them better; a determinism knob h steers how
greedy the related choice is (h=1 uniform, large h near-deterministic).
"""

from __future__ import annotations

from dataclasses import dataclass

from .solution import EPS, Solution, objective, pull


@dataclass(frozen=True)
class ShawParams:
    n: int      # how many customers to free
    h: float    # determinism exponent, rank = floor(u^h * candidates)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("selection size must be non-negative")
        if self.h <= 0:
            raise ValueError("determinism exponent must be positive")


def relatedness(inst, sol, i: int, j: int) -> float:
    """High when i and j are near each other, higher still when co-routed."""
    ri = sol.route_of[i]
    same = ri >= 0 and ri == sol.route_of[j]
    den = inst.dist[i][j] / inst.d_max + (0.0 if same else 1.0)
    return 1.0 / den if den > 0 else float("inf")


def shaw_select(inst, sol, ctx, p: ShawParams) -> set:
    """Pick p.n customers: the unassigned pool first, then related growth.

    While the target is not met, a random already-picked customer votes:
    the remaining candidates are ranked by relatedness to it and the
    rank floor(u^h * count) joins the selection.
    """
    take = min(p.n, inst.n)
    selected = sorted(sol.unassigned)[:take]
    if len(selected) >= take:
        return set(selected)
    sel_set = set(selected)
    rng = ctx.rng
    if not selected:
        assigned = [i for i in range(1, inst.n + 1) if sol.route_of[i] >= 0]
        if not assigned:
            return set()
        seed = assigned[rng.randrange(len(assigned))]
        selected.append(seed)
        sel_set.add(seed)
    while len(selected) < take:
        i = selected[rng.randrange(len(selected))]
        cands = [j for j in range(1, inst.n + 1) if j not in sel_set]
        cands.sort(key=lambda j: (-relatedness(inst, sol, i, j), j))
        idx = int(rng.random() ** p.h * len(cands))
        if idx >= len(cands):
            idx = len(cands) - 1
        pick = cands[idx]
        selected.append(pick)
        sel_set.add(pick)
    return sel_set


def lns_optimize(inst, sol: Solution, ctx, n: int, h: float,
                 rebuild) -> Solution:
    """Free n related customers, rebuild, commit only clear wins.

    `rebuild` is any construction callable (inst, partial_solution, ctx)
    -> Solution that seats the partial solution's unassigned pool; it
    may return its argument mutated in place or a fresh solution.  The
    result is kept when the objective strictly improves (with nobody
    newly dropped), or when everyone is re-seated at equal value;
    anything else restores the pre-move state exactly.
    """
    if n <= 0:
        return sol
    val0 = objective(inst, sol, ctx)
    snap = sol.clone()
    for cust in sorted(shaw_select(inst, sol, ctx, ShawParams(n, h))):
        if sol.route_of[cust] >= 0:
            pull(inst, sol, cust)
    out = rebuild(inst, sol, ctx)
    if out is not sol:
        sol.restore(out)
    val1 = objective(inst, sol, ctx)
    ok = sol.unassigned <= snap.unassigned and (
        val1 < val0 - EPS
        or (sol.unassigned == snap.unassigned and val1 <= val0 + EPS))
    if not ok:
        sol.restore(snap)
    return sol
