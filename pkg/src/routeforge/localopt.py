"""Incremental local optimization around freshly inserted nodes.

Four inter-route moves (tail exchange, chain/node transfer, greedy route
refill) plus an intra-route 3-opt, combined into the leveled greedy
builder insert_build. Every move either commits a strict improvement of
total travel or leaves the solution untouched, so any scan terminates.

Candidate screening is O(1) per move thanks to the per-route time and
latest-start caches; an exact replay confirms a candidate before commit.
"""

from __future__ import annotations

from dataclasses import dataclass

from .solution import EPS, NoFeasibleInsertion, Solution, pull, push

ILO_NEIGHBORS = 10
MAX_CHAIN = 3
FIXPOINT_GUARD = 12  # safety bound on rescans after commits


@dataclass(frozen=True)
class MoveOutcome:
    applied: bool
    delta: float = 0.0
    routes_touched: tuple = ()


REJECT = MoveOutcome(False, 0.0, ())


def _replay(inst, seq):
    """(feasible, length, times) via earliest-start simulation."""
    dist, dur, a, b = inst.dist, inst.d, inst.a, inst.b
    t = 0.0
    prev = 0
    length = 0.0
    times = []
    for cst in seq:
        arr = t + dur[prev] + dist[prev][cst]
        ac = a[cst]
        t = arr if arr > ac else ac
        if t > b[cst] + EPS:
            return False, 0.0, None
        length += dist[prev][cst]
        times.append(t)
        prev = cst
    if seq:
        if t + dur[prev] + dist[prev][0] > b[0] + EPS:
            return False, 0.0, None
        length += dist[prev][0]
    return True, length, times


def _commit_two(sol, ia, new_a, ib, new_b):
    """Install two rewritten sequences; returns surviving indices (or None)."""
    ra, rb = sol.routes[ia], sol.routes[ib]
    ra.seq = new_a
    rb.seq = new_b
    sol.D += sol._recompute(ra)
    sol.D += sol._recompute(rb)
    sol._reindex(ia)
    sol._reindex(ib)
    out = {ia: ia, ib: ib}
    for drop in sorted((i for i in (ia, ib) if not sol.routes[i].seq),
                       reverse=True):
        sol.routes.pop(drop)
        out[drop] = None
        for k, v in out.items():
            if v is not None and v > drop:
                out[k] = v - 1
        for k in range(drop, len(sol.routes)):
            sol._reindex(k)
    return out[ia], out[ib]


def two_opt_exchange(inst, sol, ra, ea, rb, eb, polish=True) -> MoveOutcome:
    """Swap the route tails after edge ea of route ra and edge eb of rb.

    Edge k of a route is the arc entering its k-th customer (k = length
    means the closing arc back to the depot). The rewiring links each
    route's head to the other's tail; commit only when both rewired
    routes are feasible and total length strictly drops.
    """
    if ra == rb:
        raise ValueError("edges must lie on distinct routes")
    A, B = sol.routes[ra], sol.routes[rb]
    sa, sb = A.seq, B.seq
    if not (0 <= ea <= len(sa) and 0 <= eb <= len(sb)):
        raise ValueError("edge index out of range")
    dist, dur, a_open, C = inst.dist, inst.d, inst.a, inst.C

    x = sa[ea - 1] if ea > 0 else 0   # head end of route A
    y = sa[ea] if ea < len(sa) else 0  # first node of A's tail
    i = sb[eb - 1] if eb > 0 else 0
    ip = sb[eb] if eb < len(sb) else 0
    # cheap screen on the four touched arcs
    gain = dist[x][y] + dist[i][ip] - dist[x][ip] - dist[i][y]
    if gain <= EPS:
        return REJECT

    load_head_a = sum(inst.c[u] for u in sa[:ea])
    load_head_b = sum(inst.c[u] for u in sb[:eb])
    load_tail_a = A.load - load_head_a
    load_tail_b = B.load - load_head_b
    if load_head_a + load_tail_b > C or load_head_b + load_tail_a > C:
        return REJECT

    dep_x = (A.times[ea - 1] + dur[x]) if ea > 0 else 0.0
    dep_i = (B.times[eb - 1] + dur[i]) if eb > 0 else 0.0
    # A's head + B's tail
    if eb < len(sb):
        arr = dep_x + dist[x][ip]
        start = arr if arr > a_open[ip] else a_open[ip]
        if start > B.lat[eb] + EPS:
            return REJECT
    elif dep_x + dist[x][0] > inst.b[0] + EPS:
        return REJECT
    # B's head + A's tail
    if ea < len(sa):
        arr = dep_i + dist[i][y]
        start = arr if arr > a_open[y] else a_open[y]
        if start > A.lat[ea] + EPS:
            return REJECT
    elif dep_i + dist[i][0] > inst.b[0] + EPS:
        return REJECT

    new_a = sa[:ea] + sb[eb:]
    new_b = sb[:eb] + sa[ea:]
    ok_a, len_a, _ = _replay(inst, new_a)
    ok_b, len_b, _ = _replay(inst, new_b)
    if not (ok_a and ok_b):
        return REJECT
    delta = (len_a + len_b) - (A.length + B.length)
    if delta >= -EPS:
        return REJECT
    na, nb = _commit_two(sol, ra, new_a, rb, new_b)
    touched = tuple(k for k in (na, nb) if k is not None)
    # the receiving route gets an internal polish, the donor a refill pass
    if polish:
        if nb is not None:
            delta += intra_route_3opt(inst, sol, nb).delta
        if na is not None:
            delta += greedy_route_optimization(inst, sol, na).delta
    return MoveOutcome(True, delta, touched)


def chain_transfer(inst, sol, src, start, length, dst, after,
                   polish=True) -> MoveOutcome:
    """Move src.seq[start:start+length] into dst right after position `after`.

    `after` = -1 splices at the head. Commit requires feasibility of both
    rewритten routes and a strict drop of their summed length.
    """
    if src == dst:
        raise ValueError("transfer needs two distinct routes")
    S, D_ = sol.routes[src], sol.routes[dst]
    ss, sd = S.seq, D_.seq
    if not (0 <= start and start + length <= len(ss) and length >= 1):
        raise ValueError("chain out of range")
    if not (-1 <= after < len(sd)):
        raise ValueError("anchor out of range")
    dist, dur, a_open = inst.dist, inst.d, inst.a

    chain = ss[start:start + length]
    load_chain = sum(inst.c[u] for u in chain)
    if D_.load + load_chain > inst.C:
        return REJECT

    y, yp = chain[0], chain[-1]
    x = ss[start - 1] if start > 0 else 0
    z_src = ss[start + length] if start + length < len(ss) else 0
    i = sd[after] if after >= 0 else 0
    z_dst = sd[after + 1] if after + 1 < len(sd) else 0
    gain = (dist[x][y] + dist[yp][z_src] - dist[x][z_src]
            + dist[i][z_dst] - dist[i][y] - dist[yp][z_dst])
    if gain <= EPS:
        return REJECT

    # source side: head meets its old tail
    dep_x = (S.times[start - 1] + dur[x]) if start > 0 else 0.0
    if start + length < len(ss):
        arr = dep_x + dist[x][z_src]
        st = arr if arr > a_open[z_src] else a_open[z_src]
        if st > S.lat[start + length] + EPS:
            return REJECT
    elif dep_x + dist[x][0] > inst.b[0] + EPS:
        return REJECT
    # destination side: walk the chain, then meet the old tail
    t = (D_.times[after] + dur[i]) if after >= 0 else 0.0
    prev = i
    ok = True
    for cst in chain:
        arr = t + dist[prev][cst]
        st = arr if arr > a_open[cst] else a_open[cst]
        if st > inst.b[cst] + EPS:
            ok = False
            break
        t = st + dur[cst]
        prev = cst
    if not ok:
        return REJECT
    if after + 1 < len(sd):
        arr = t + dist[prev][z_dst]
        st = arr if arr > a_open[z_dst] else a_open[z_dst]
        if st > D_.lat[after + 1] + EPS:
            return REJECT
    elif t + dist[prev][0] > inst.b[0] + EPS:
        return REJECT

    new_s = ss[:start] + ss[start + length:]
    new_d = sd[:after + 1] + chain + sd[after + 1:]
    ok_s, len_s, _ = _replay(inst, new_s)
    ok_d, len_d, _ = _replay(inst, new_d)
    if not (ok_s and ok_d):
        return REJECT
    delta = (len_s + len_d) - (S.length + D_.length)
    if delta >= -EPS:
        return REJECT
    ns, nd = _commit_two(sol, src, new_s, dst, new_d)
    touched = tuple(k for k in (ns, nd) if k is not None)
    if polish:
        if nd is not None:
            delta += intra_route_3opt(inst, sol, nd).delta
        if ns is not None:
            delta += greedy_route_optimization(inst, sol, ns).delta
    return MoveOutcome(True, delta, touched)


def node_transfer(inst, sol, src, pos, dst, after, polish=True) -> MoveOutcome:
    """chain_transfer restricted to a single node."""
    return chain_transfer(inst, sol, src, pos, 1, dst, after, polish=polish)


def intra_route_3opt(inst, sol, ri) -> MoveOutcome:
    """Hill-climb one route with segment reversals and short relocations.

    First improvement in position order, repeated until no move helps.
    Covers the classic 3-opt reconnections that keep one route (2-opt
    reversal as the degenerate case; segments of up to 3 customers moved
    and optionally flipped).
    """
    r = sol.routes[ri]
    if not r.seq:
        raise ValueError("empty route")
    total = 0.0
    improved = True
    while improved:
        improved = False
        seq = r.seq
        L = len(seq)
        best = None
        for p in range(L - 1):
            if best:
                break
            for q in range(p + 1, L):
                cand = seq[:p] + seq[p:q + 1][::-1] + seq[q + 1:]
                ok, length, _ = _replay(inst, cand)
                if ok and length < r.length - EPS:
                    best = (cand, length)
                    break
        if not best:
            for m in range(1, min(MAX_CHAIN, L - 1) + 1):
                if best:
                    break
                for p in range(L - m + 1):
                    if best:
                        break
                    seg = seq[p:p + m]
                    rest = seq[:p] + seq[p + m:]
                    for k in range(len(rest) + 1):
                        if k == p:
                            continue
                        for piece in ((seg, seg[::-1]) if m > 1 else (seg,)):
                            cand = rest[:k] + piece + rest[k:]
                            ok, length, _ = _replay(inst, cand)
                            if ok and length < r.length - EPS:
                                best = (cand, length)
                                break
                        if best:
                            break
        if best:
            cand, length = best
            r.seq = cand
            delta = sol._recompute(r)
            sol.D += delta
            sol._reindex(ri)
            total += delta
            improved = True
    return MoveOutcome(total < -EPS, total, (ri,))


def greedy_route_optimization(inst, sol, ri) -> MoveOutcome:
    """Pull nearby outside customers into route ri when that shortens travel.

    Candidates are the assigned members of the 10-nearest lists of ri's
    customers; each accepted relocation is a strict total improvement.
    """
    if not (0 <= ri < len(sol.routes)):
        raise ValueError("no such route")
    nbs = inst.neighbors(ILO_NEIGHBORS)
    members = set(sol.routes[ri].seq)
    cands = sorted({y for u in sol.routes[ri].seq for y in nbs[u]
                    if y not in members and sol.route_of[y] >= 0})
    total = 0.0
    touched = {ri}
    guard = 0
    while guard < FIXPOINT_GUARD:
        guard += 1
        committed = False
        for y in cands:
            src = sol.route_of[y]
            if src < 0 or src == ri:
                continue
            pos = sol.pos_of[y]
            best = None
            for after in range(-1, len(sol.routes[ri].seq)):
                out = _transfer_screen(inst, sol, src, pos, ri, after)
                if out is not None and (best is None or out < best[0] - EPS):
                    best = (out, after)
            if best is None:
                continue
            n_routes = len(sol.routes)
            res = chain_transfer(inst, sol, src, pos, 1, ri, best[1],
                                 polish=False)
            if res.applied:
                if len(sol.routes) < n_routes and src < ri:
                    ri -= 1  # the emptied source dropped and shifted us down
                delta = res.delta + intra_route_3opt(inst, sol, ri).delta
                total += delta
                touched.update(res.routes_touched)
                committed = True
                break
        if not committed:
            break
    return MoveOutcome(total < -EPS, total, tuple(sorted(touched)))


def _transfer_screen(inst, sol, src, pos, dst, after):
    """Arc-delta of a single-node transfer if the O(1) screens pass, else None."""
    S, D_ = sol.routes[src], sol.routes[dst]
    y = S.seq[pos]
    if D_.load + inst.c[y] > inst.C:
        return None
    dist, dur, a_open = inst.dist, inst.d, inst.a
    ss, sd = S.seq, D_.seq
    x = ss[pos - 1] if pos > 0 else 0
    z_src = ss[pos + 1] if pos + 1 < len(ss) else 0
    i = sd[after] if after >= 0 else 0
    z_dst = sd[after + 1] if after + 1 < len(sd) else 0
    delta = (dist[x][z_src] - dist[x][y] - dist[y][z_src]
             + dist[i][y] + dist[y][z_dst] - dist[i][z_dst])
    if delta >= -EPS:
        return None
    t_i = (D_.times[after] + dur[i]) if after >= 0 else 0.0
    arr = t_i + dist[i][y]
    st = arr if arr > a_open[y] else a_open[y]
    if st > inst.b[y] + EPS:
        return None
    if after + 1 < len(sd):
        arr2 = st + dur[y] + dist[y][z_dst]
        st2 = arr2 if arr2 > a_open[z_dst] else a_open[z_dst]
        if st2 > D_.lat[after + 1] + EPS:
            return None
    elif st + dur[y] + dist[y][0] > inst.b[0] + EPS:
        return None
    return delta


def apply_ilo(inst, sol, ctx, cust, level):
    """Run the level's move mix around one just-inserted customer to a fixpoint."""
    if level < 1:
        return
    nbs = inst.neighbors(ILO_NEIGHBORS)[cust]
    guard = 0
    while guard < FIXPOINT_GUARD:
        guard += 1
        ri = sol.route_of[cust]
        if ri < 0:
            break
        partners = sorted({sol.route_of[nb] for nb in nbs
                           if sol.route_of[nb] >= 0} - {ri})
        committed = False
        for rp in partners:
            pc = sol.pos_of[cust]
            for nb in nbs:
                if sol.route_of[nb] != rp:
                    continue
                pn = sol.pos_of[nb]
                for eb in (pc, pc + 1):
                    for ea in (pn, pn + 1):
                        out = two_opt_exchange(inst, sol, rp, ea, ri, eb)
                        if out.applied:
                            committed = True
                            break
                    if committed:
                        break
                if committed:
                    break
            if committed:
                break
        if committed:
            continue
        if level >= 2:
            for rp in partners:
                pc = sol.pos_of[cust]
                for nb in nbs:
                    if sol.route_of[nb] != rp:
                        continue
                    pn = sol.pos_of[nb]
                    n_rp = len(sol.routes[rp].seq)
                    for m in range(1, MAX_CHAIN + 1):
                        starts = (pn,) if m == 1 else (pn - m + 1, pn)
                        for start in starts:
                            if start < 0 or start + m > n_rp:
                                continue
                            for after in (pc - 1, pc):
                                out = chain_transfer(inst, sol, rp, start, m,
                                                     ri, after)
                                if out.applied:
                                    committed = True
                                    break
                            if committed:
                                break
                        if committed:
                            break
                    if committed:
                        break
                if committed:
                    break
        if committed:
            continue
        if level >= 3:
            out = greedy_route_optimization(inst, sol, ri)
            if out.applied:
                continue
        break


def _reconstruct(inst, sol, ctx, cust):
    """Free the route passing closest to cust, seat cust first, re-push the rest."""
    if not sol.routes:
        return False
    dc = inst.dist[cust]
    best = min(range(len(sol.routes)),
               key=lambda k: (min(dc[u] for u in sol.routes[k].seq), k))
    snap = sol.clone()
    victims = list(sol.routes[best].seq)
    for v in victims:
        pull(inst, sol, v)
    order = sorted(victims, key=lambda i: (inst.b[i], i))
    try:
        push(inst, sol, cust, ctx)
        for v in order:
            push(inst, sol, v, ctx)
    except NoFeasibleInsertion:
        sol.restore(snap)
        return False
    return True


def insert_one(inst, sol, ctx, cust, level) -> bool:
    """Greedy insertion of one customer plus its ILO pass; False if stuck."""
    try:
        push(inst, sol, cust, ctx)
    except NoFeasibleInsertion:
        if level == 4 and _reconstruct(inst, sol, ctx, cust):
            apply_ilo(inst, sol, ctx, cust, level)
            return True
        return False
    apply_ilo(inst, sol, ctx, cust, level)
    return True


def static_order(inst, pool=None):
    """The fixed greedy insertion order: earliest deadline first."""
    b = inst.b
    pool = range(1, inst.n + 1) if pool is None else pool
    return sorted(pool, key=lambda i: (b[i], i))


def insert_build(inst, ctx, level: int, start: Solution | None = None) -> Solution:
    """Greedy build with incremental local optimization at the given level.

    0 = plain pushes; 1 = +tail exchanges; 2 = +chain transfers; 3 = +route
    refill; 4 = level 3 plus route reconstruction when an insertion fails.
    Customers that still do not fit stay unassigned. With `start` given the
    build continues from that partial solution, inserting only its
    unassigned pool (the solution is modified in place and returned).
    """
    if level not in (0, 1, 2, 3, 4):
        raise ValueError(f"ILO level must be 0..4, got {level}")
    sol = Solution(inst) if start is None else start
    for cust in static_order(inst, sol.unassigned):
        insert_one(inst, sol, ctx, cust, level)
    return sol
