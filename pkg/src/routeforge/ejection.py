"""Ejection chains and ejection trees.

A stuck customer can often be seated by evicting somebody else: an
ejection edge (a, b) inserts a into b's route at b's expense.  Chains
string such edges through pairwise-distinct routes until the last
evicted customer fits somewhere directly; trees instead force the
customer into a route, eject a minimal conflicting segment, and
recursively re-seat its members, branching over a few candidate routes
under a discrepancy budget.

Both optimizers share one commit discipline: snapshot, pull a selected
customer, search, apply the best repair, and keep the result only if
the objective did not worsen and nobody previously served was dropped;
otherwise the snapshot is restored bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .localopt import static_order
from .solution import (EPS, NoFeasibleInsertion, Solution, apply_insertion,
                       objective, pull, push)

MAX_CHAIN_EDGES = 3
TREE_DEPTH_MAX = 4
TREE_FAN_OUT = 3
FRESH = -1  # route marker: open a new route


@dataclass(frozen=True)
class EjectionEdge:
    node: int     # customer being inserted
    ejected: int  # customer it displaces
    route: int    # route holding `ejected` at search time
    delta: float  # length change of that route


@dataclass(frozen=True)
class EjectionChain:
    root: int
    edges: tuple
    terminal_route: int  # receives the last free customer, FRESH for a new one
    cost: float          # total travel delta over all touched routes


def _route_view(inst, seq):
    """Service starts and latest-start bounds for a feasible sequence."""
    dist, dur, a, b = inst.dist, inst.d, inst.a, inst.b
    times = []
    t = 0.0
    prev = 0
    for cst in seq:
        arr = t + dur[prev] + dist[prev][cst]
        ac = a[cst]
        t = arr if arr > ac else ac
        times.append(t)
        prev = cst
    lat = [0.0] * len(seq)
    nxt_lat = b[0]
    nxt = 0
    for k in range(len(seq) - 1, -1, -1):
        cst = seq[k]
        lim = nxt_lat - dur[cst] - dist[cst][nxt]
        lat[k] = lim if lim < b[cst] else b[cst]
        nxt_lat = lat[k]
        nxt = cst
    return times, lat


def _best_slot(inst, seq, times, lat, load, cust):
    """Cheapest feasible insertion of cust into one explicit sequence.

    Returns (delta, pos) or None; mirrors the global push scan but for a
    single route given by value.
    """
    if load + inst.c[cust] > inst.C:
        return None
    dist, dur, a = inst.dist, inst.d, inst.a
    ac, bc, dc = a[cust], inst.b[cust], inst.d[cust]
    b0 = inst.b[0]
    dist_c = dist[cust]
    best = None
    prev = 0
    depart = 0.0
    for pos in range(len(seq) + 1):
        arr = depart + dist[prev][cust]
        start = arr if arr > ac else ac
        if start <= bc + EPS:
            if pos < len(seq):
                nxt = seq[pos]
                tn = start + dc + dist_c[nxt]
                an = a[nxt]
                sn = tn if tn > an else an
                ok = sn <= lat[pos] + EPS
                delta = dist[prev][cust] + dist_c[nxt] - dist[prev][nxt]
            else:
                ok = start + dc + dist_c[0] <= b0 + EPS
                delta = dist[prev][cust] + dist_c[0] - dist[prev][0]
            if ok and (best is None or delta < best[0] - EPS):
                best = (delta, pos)
        if pos < len(seq):
            prev = seq[pos]
            depart = times[pos] + dur[prev]
    return best


def _swap_eval(inst, sol, a, b):
    """Length delta of evicting b and seating a in b's route.

    Returns (delta, pos) with pos in the b-less sequence, or None.
    """
    ri = sol.route_of[b]
    r = sol.routes[ri]
    pos_b = sol.pos_of[b]
    seq = r.seq[:pos_b] + r.seq[pos_b + 1:]
    xs = r.seq
    x = xs[pos_b - 1] if pos_b > 0 else 0
    z = xs[pos_b + 1] if pos_b + 1 < len(xs) else 0
    dist = inst.dist
    saving = dist[x][b] + dist[b][z] - dist[x][z]
    times, lat = _route_view(inst, seq)
    got = _best_slot(inst, seq, times, lat, r.load - inst.c[b], a)
    if got is None:
        return None
    return got[0] - saving, got[1]


def _admit(bucket, cand):
    """Pareto filter on (cost, routes used); earlier labels win ties."""
    for lab in bucket:
        if lab[0] <= cand[0] + EPS and lab[3] <= cand[3]:
            return False
    bucket[:] = [lab for lab in bucket
                 if not (cand[0] < lab[0] - EPS and cand[3] <= lab[3])]
    bucket.append(cand)
    return True


def ejection_chain_search(inst, sol, root, ctx,
                          max_edges: int = MAX_CHAIN_EDGES):
    """Cheapest ejection chain seating `root`, or None.

    Breadth-first label search: each customer keeps the cheapest known
    chains reaching it (several survive when they tie up different route
    sets), and a chain closes by inserting its last free customer into a
    route it has not touched, or a fresh one while the fleet allows.
    Candidate evictions come from the 10-nearest lists, routes along a
    chain stay pairwise distinct, so edge costs are independent and add.
    """
    if sol.route_of[root] >= 0:
        raise ValueError(f"customer {root} is still assigned")
    nbs = inst.neighbors()
    # label: (cost, node, edges, frozenset of routes used)
    start = (0.0, root, (), frozenset())
    labels = {root: [start]}
    frontier = [start]
    for _ in range(max_edges):
        nxt = []
        for lab in frontier:
            cost_a, a, edges, used = lab
            if lab not in labels[a]:
                continue  # dominated after being queued
            for b in nbs[a]:
                rb = sol.route_of[b]
                if rb < 0 or rb in used:
                    continue
                ctx.insertion_counter += 1
                got = _swap_eval(inst, sol, a, b)
                if got is None:
                    continue
                cand = (cost_a + got[0], b,
                        edges + (EjectionEdge(a, b, rb, got[0]),),
                        used | {rb})
                if _admit(labels.setdefault(b, []), cand):
                    nxt.append(cand)
        frontier = nxt
    best = None  # (total cost, terminal route, edges)
    cap = ctx.cap_for(inst)
    for node, bucket in labels.items():
        for cost_n, _, edges, used in bucket:
            for ri in range(len(sol.routes)):
                if ri in used:
                    continue
                ctx.insertion_counter += 1
                r = sol.routes[ri]
                got = _best_slot(inst, r.seq, r.times, r.lat, r.load, node)
                if got is None:
                    continue
                total = cost_n + got[0]
                if best is None or total < best[0] - EPS:
                    best = (total, ri, edges)
            if len(sol.routes) < cap:
                ctx.insertion_counter += 1
                got = _best_slot(inst, [], [], [], 0, node)
                if got is not None:
                    total = cost_n + got[0]
                    if best is None or total < best[0] - EPS:
                        best = (total, FRESH, edges)
    if best is None:
        return None
    total, term_route, edges = best
    return EjectionChain(root, edges, term_route, total)


def push_into_route(inst, sol, cust, ri, ctx):
    """Cheapest insertion into one specific route (FRESH opens a new one)."""
    ctx.insertion_counter += 1
    if ri == FRESH:
        if len(sol.routes) >= ctx.cap_for(inst):
            raise NoFeasibleInsertion(cust)
        got = _best_slot(inst, [], [], [], 0, cust)
        ri, pos = len(sol.routes), 0
    else:
        r = sol.routes[ri]
        got = _best_slot(inst, r.seq, r.times, r.lat, r.load, cust)
        pos = got[1] if got else 0
    if got is None:
        raise NoFeasibleInsertion(cust)
    apply_insertion(sol, cust, ri, pos)


def apply_chain(inst, sol, chain: EjectionChain, ctx):
    """Replay a found chain; valid only on the state it was searched on."""
    term_rep = None
    if chain.terminal_route != FRESH:
        term_rep = sol.routes[chain.terminal_route].seq[0]
    node = chain.root
    for edge in chain.edges:
        # live route index: only the ejected customer's own route can drop
        ri = sol.route_of[edge.ejected]
        n_before = len(sol.routes)
        pull(inst, sol, edge.ejected)
        target = FRESH if len(sol.routes) < n_before else ri
        push_into_route(inst, sol, node, target, ctx)
        node = edge.ejected
    if term_rep is None:
        push_into_route(inst, sol, node, FRESH, ctx)
    else:
        push_into_route(inst, sol, node, sol.route_of[term_rep], ctx)


def _removal_gain(inst, sol, cust):
    ri = sol.route_of[cust]
    seq = sol.routes[ri].seq
    pos = sol.pos_of[cust]
    x = seq[pos - 1] if pos > 0 else 0
    z = seq[pos + 1] if pos + 1 < len(seq) else 0
    dist = inst.dist
    return dist[x][cust] + dist[cust][z] - dist[x][z]


def select_customers(inst, sol, ctx, n, m):
    """Selection heuristics shared by the chain and tree optimizers.

    m=1 draws uniformly without replacement; m=2 takes the customers
    whose removal saves the most travel (biggest detours first).
    """
    assigned = [i for i in range(1, inst.n + 1) if sol.route_of[i] >= 0]
    if not assigned:
        return []
    k = min(n, len(assigned))
    if m == 1:
        return ctx.rng.sample(assigned, k)
    if m == 2:
        ranked = sorted(assigned,
                        key=lambda i: (-_removal_gain(inst, sol, i), i))
        return ranked[:k]
    raise ValueError(f"unknown selection heuristic {m}")


def chain_optimize(inst, sol: Solution, ctx, n: int, m: int) -> Solution:
    """n rounds of pull-and-reseat-via-cheapest-ejection-chain."""
    if n < 1:
        raise ValueError("need at least one round")
    for cust in select_customers(inst, sol, ctx, n, m):
        val0 = objective(inst, sol, ctx)
        snap = sol.clone()
        pull(inst, sol, cust)
        chain = ejection_chain_search(inst, sol, cust, ctx)
        ok = False
        if chain is not None:
            try:
                apply_chain(inst, sol, chain, ctx)
                ok = True
            except NoFeasibleInsertion:
                ok = False
        if ok:
            val1 = objective(inst, sol, ctx)
            ok = val1 <= val0 + EPS and sol.unassigned <= snap.unassigned
        if not ok:
            sol.restore(snap)
    return sol


def _eject_plan(inst, sol, ri, x):
    """Smallest consecutive segment whose ejection lets x take its place.

    Returns (count, load_sum, delta, ri, i, j): ejecting seq[i:j] and
    seating x at position i is feasible, minimizing (fewest ejected,
    lightest load, cheapest detour, earliest start).  None when even
    emptying the route does not admit x.
    """
    r = sol.routes[ri]
    seq = r.seq
    n = len(seq)
    dist, dur, a, b, c = inst.dist, inst.d, inst.a, inst.b, inst.c
    ax, bx, cx, dx = a[x], b[x], c[x], dur[x]
    if cx > inst.C:
        return None
    b0 = b[0]
    lat = r.lat
    times = r.times
    dist_x = dist[x]
    # prefix loads, departure times, and padded-path arc sums
    cl = [0] * (n + 1)
    dep = [0.0] * (n + 1)
    arcs = [0.0] * (n + 2)
    prev = 0
    for i in range(n):
        cl[i + 1] = cl[i] + c[seq[i]]
        dep[i + 1] = times[i] + dur[seq[i]]
        arcs[i + 1] = arcs[i] + dist[prev][seq[i]]
        prev = seq[i]
    arcs[n + 1] = arcs[n] + dist[prev][0]
    for cnt in range(n + 1):
        found = None
        for i in range(n - cnt + 1):
            j = i + cnt
            if r.load - (cl[j] - cl[i]) + cx > inst.C:
                continue
            p = seq[i - 1] if i > 0 else 0
            arr = dep[i] + dist[p][x]
            start = arr if arr > ax else ax
            if start > bx + EPS:
                continue
            if j < n:
                nxt = seq[j]
                tn = start + dx + dist_x[nxt]
                an = a[nxt]
                sn = tn if tn > an else an
                if sn > lat[j] + EPS:
                    continue
                added = dist[p][x] + dist_x[nxt]
            else:
                if start + dx + dist_x[0] > b0 + EPS:
                    continue
                added = dist[p][x] + dist_x[0]
            lsum = cl[j] - cl[i]
            delta = added - (arcs[j + 1] - arcs[i])
            key = (lsum, delta, i)
            if found is None or key < found[0]:
                found = (key, i, j)
        if found is not None:
            (lsum, delta, _), i, j = found
            return (cnt, lsum, delta, ri, i, j)
    return None


def _force(inst, sol, x, plan, ctx, work, depth):
    """Eject the plan's segment, seat x in its place, re-push the ejected.

    Members that no longer fit anywhere are appended to `work` one level
    deeper.
    """
    _, _, _, ri, i, j = plan
    seg = sol.routes[ri].seq[i:j]
    n_before = len(sol.routes)
    for e in seg:
        pull(inst, sol, e)
    ctx.insertion_counter += 1
    if len(sol.routes) < n_before:
        apply_insertion(sol, x, len(sol.routes), 0)
    else:
        apply_insertion(sol, x, ri, i)
    for e in static_order(inst, seg):
        try:
            push(inst, sol, e, ctx)
        except NoFeasibleInsertion:
            work.append((e, depth + 1))


def ejection_tree_search(inst, sol, root, ctx, k: int = TREE_FAN_OUT,
                         d_cut: int = 0, depth_max: int = TREE_DEPTH_MAX,
                         stats=None):
    """Best complete re-seating found by a forced-insertion tree, or None.

    Stack discipline: pop a stuck customer, rank every route by how
    little must be ejected to admit it, branch over the top k; taking any
    route but the first costs one discrepancy from `d_cut`.  Ejected
    customers re-insert greedily and the failures go back on the stack,
    until depth_max.  A branch whose stack empties registers its
    solution; the cheapest registered one wins.  The input solution is
    never mutated.
    """
    if sol.route_of[root] >= 0:
        raise ValueError(f"customer {root} is still assigned")
    if k < 1:
        raise ValueError("fan-out must be at least 1")
    budget_nodes = sum(k ** j for j in range(depth_max + 1))
    states = [(sol.clone(), [(root, 0)], d_cut)]
    best_val = None
    best_sol = None
    while states and budget_nodes > 0:
        cur, work, budget = states.pop()
        dead = False
        while work:
            if budget_nodes <= 0:
                dead = True
                break
            budget_nodes -= 1
            if stats is not None:
                stats["nodes"] = stats.get("nodes", 0) + 1
            x, depth = work.pop()
            if depth >= depth_max:
                dead = True
                break
            plans = []
            for ri in range(len(cur.routes)):
                ctx.insertion_counter += 1
                plan = _eject_plan(inst, cur, ri, x)
                if plan is not None:
                    plans.append(plan)
            if not plans:
                dead = True
                break
            plans.sort(key=lambda p: (p[0], p[1], p[2], p[3]))
            if budget > 0:
                for alt in reversed(plans[1:k]):
                    child = cur.clone()
                    child_work = list(work)
                    _force(inst, child, x, alt, ctx, child_work, depth)
                    states.append((child, child_work, budget - 1))
            _force(inst, cur, x, plans[0], ctx, work, depth)
        if dead:
            continue
        val = objective(inst, cur, ctx)
        if best_val is None or val < best_val - EPS:
            best_val = val
            best_sol = cur
    return best_sol


def tree_optimize(inst, sol: Solution, ctx, n: int, m: int,
                  k: int) -> Solution:
    """n rounds of pull-and-reseat-via-ejection-tree (k discrepancies)."""
    if n < 1:
        raise ValueError("need at least one round")
    for cust in select_customers(inst, sol, ctx, n, m):
        val0 = objective(inst, sol, ctx)
        snap = sol.clone()
        pull(inst, sol, cust)
        got = ejection_tree_search(inst, sol, cust, ctx, d_cut=k)
        ok = got is not None
        if ok:
            val1 = objective(inst, got, ctx)
            ok = val1 <= val0 + EPS and got.unassigned <= snap.unassigned
        if ok:
            sol.restore(got)
        else:
            sol.restore(snap)
    return sol
