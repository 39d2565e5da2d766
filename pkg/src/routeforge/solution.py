"""Mutable solution state, the push/pull primitives and the objective.

A solution is a list of non-empty routes plus a pool of unassigned
customers. Each route caches its load, length, per-position service
start times and the latest feasible start per position; the two time
arrays make one insertion-candidate check O(1), so evaluating a whole
route costs one pass over its gaps.

The insertion counter on the evaluation context advances by one per
candidate route examined, wherever that examination happens (greedy
builds, discrepancy branches, ejection edges). It is the cost metric
every report and every budget in this package is expressed in.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

EPS = 1e-9
# validation tolerance is looser than EPS: caches are rebuilt per route
# but the running length total accumulates float error over many moves
VAL_TOL = 1e-6

ROUTE_PENALTY = 1_000_000.0
TRAVEL_EOPT = 25


class NoFeasibleInsertion(Exception):
    """No route and position admits the customer; the solution is unchanged."""


@dataclass
class InsertionReport:
    cust: int
    route: int
    position: int
    delta: float
    second_route: int | None = None
    second_position: int | None = None
    second_delta: float | None = None


@dataclass
class RemovalReport:
    cust: int
    route: int
    position: int
    delta: float


@dataclass
class Violation:
    kind: str  # coverage | capacity | window | chronology | cache
    route: int | None
    cust: int | None
    detail: str

    def __str__(self):
        where = f" route {self.route}" if self.route is not None else ""
        who = f" customer {self.cust}" if self.cust is not None else ""
        return f"{self.kind}{where}{who}: {self.detail}"


class EvalContext:
    """Objective configuration, the insertion counter and the random stream.

    Contexts are cheap; independent runs get independent contexts derived
    from a seed key so that parallel and serial execution see identical
    random streams.
    """

    __slots__ = ("mode", "eopt", "insertion_counter", "rng", "seed_key",
                 "route_cap", "trace")

    def __init__(self, seed=0, mode="travel", eopt=None, route_cap=None):
        if mode not in ("travel", "trucks"):
            raise ValueError(f"unknown objective mode {mode!r}")
        self.mode = mode
        self.eopt = dict(eopt) if eopt else {}
        self.insertion_counter = 0
        self.seed_key = str(seed)
        self.rng = random.Random(self.seed_key)
        self.route_cap = route_cap
        self.trace = None

    def derive(self, tag) -> "EvalContext":
        child = EvalContext(f"{self.seed_key}:{tag}", self.mode, self.eopt,
                            self.route_cap)
        return child

    def tick(self, k: int = 1):
        self.insertion_counter += k

    def eopt_for(self, inst) -> int:
        if self.mode == "travel":
            # high enough that the route penalty can never trigger
            return max(TRAVEL_EOPT, inst.fleet_limit)
        if inst.E_opt is not None:
            return inst.E_opt
        try:
            return self.eopt[inst.id]
        except KeyError:
            raise ValueError(f"no route-count target for instance {inst.id!r} "
                             "in trucks mode") from None

    def cap_for(self, inst) -> int:
        if self.route_cap is not None:
            return min(self.route_cap, inst.fleet_limit)
        return inst.fleet_limit


class Route:
    __slots__ = ("seq", "load", "length", "times", "lat")

    def __init__(self, seq=None):
        self.seq = seq or []
        self.load = 0
        self.length = 0.0
        self.times = []
        self.lat = []

    def clone(self) -> "Route":
        r = Route.__new__(Route)
        r.seq = self.seq[:]
        r.load = self.load
        r.length = self.length
        r.times = self.times[:]
        r.lat = self.lat[:]
        return r


class Solution:
    __slots__ = ("inst", "routes", "route_of", "pos_of", "unassigned", "D")

    def __init__(self, inst):
        self.inst = inst
        self.routes: list[Route] = []
        self.route_of = [-1] * (inst.n + 1)
        self.pos_of = [-1] * (inst.n + 1)
        self.unassigned = set(range(1, inst.n + 1))
        self.D = 0.0

    @property
    def E(self) -> int:
        return len(self.routes)

    def clone(self) -> "Solution":
        s = Solution.__new__(Solution)
        s.inst = self.inst
        s.routes = [r.clone() for r in self.routes]
        s.route_of = self.route_of[:]
        s.pos_of = self.pos_of[:]
        s.unassigned = set(self.unassigned)
        s.D = self.D
        return s

    def restore(self, snap: "Solution"):
        """Adopt a snapshot's state wholesale; the snapshot is consumed."""
        self.routes = snap.routes
        self.route_of = snap.route_of
        self.pos_of = snap.pos_of
        self.unassigned = snap.unassigned
        self.D = snap.D

    def time_of(self, cust: int) -> float:
        return self.routes[self.route_of[cust]].times[self.pos_of[cust]]

    def _recompute(self, r: Route, given_times=None):
        """Rebuild a route's caches; returns the length delta."""
        inst = self.inst
        dist, dur, a, b = inst.dist, inst.d, inst.a, inst.b
        seq = r.seq
        old_len = r.length
        load = 0
        length = 0.0
        times = []
        prev = 0
        t_prev = 0.0
        for cst in seq:
            load += inst.c[cst]
            length += dist[prev][cst]
            arr = t_prev + dur[prev] + dist[prev][cst]
            t = given_times[cst] if given_times else (arr if arr > a[cst] else a[cst])
            times.append(t)
            prev = cst
            t_prev = t
        length += dist[prev][0] if seq else 0.0
        lat = [0.0] * len(seq)
        nxt_lat = b[0]
        nxt = 0
        for pos in range(len(seq) - 1, -1, -1):
            cst = seq[pos]
            lim = nxt_lat - dur[cst] - dist[cst][nxt]
            lat[pos] = lim if lim < b[cst] else b[cst]
            nxt_lat = lat[pos]
            nxt = cst
        r.load = load
        r.length = length
        r.times = times
        r.lat = lat
        return length - old_len

    def _reindex(self, ri: int):
        seq = self.routes[ri].seq
        for pos, cst in enumerate(seq):
            self.route_of[cst] = ri
            self.pos_of[cst] = pos


def build_from_routes(inst, seqs, times=None) -> Solution:
    """Assemble a Solution from route id-lists; earliest-start times unless given."""
    sol = Solution(inst)
    for seq in seqs:
        if not seq:
            continue
        r = Route(list(seq))
        sol.routes.append(r)
        sol.D += sol._recompute(r, given_times=times)
        ri = len(sol.routes) - 1
        for cst in seq:
            sol.unassigned.discard(cst)
        sol._reindex(ri)
    return sol


def plan_push(sol: Solution, cust: int, ctx: EvalContext) -> InsertionReport:
    """Find the cheapest feasible insertion without mutating the solution.

    Candidate routes are every current route plus one fresh route while
    the fleet limit allows; the report also carries the best insertion in
    the second-best route, which discrepancy search branches on.
    """
    inst = sol.inst
    dist, a, b, dur = inst.dist, inst.a, inst.b, inst.d
    ac, bc, cc, dc = a[cust], b[cust], inst.c[cust], inst.d[cust]
    cap = inst.C
    b0 = b[0]
    best = None   # (delta, route, pos)
    second = None
    counter = 0
    for ri, r in enumerate(sol.routes):
        counter += 1
        if r.load + cc > cap:
            continue
        seq = r.seq
        times = r.times
        lat = r.lat
        n_seq = len(seq)
        dist_c = dist[cust]
        rbest_delta = None
        rbest_pos = 0
        prev = 0
        depart = 0.0  # departure time from prev (service end)
        for pos in range(n_seq + 1):
            arr = depart + dist[prev][cust]
            start = arr if arr > ac else ac
            if start <= bc + EPS:
                if pos < n_seq:
                    nxt = seq[pos]
                    tn = start + dc + dist_c[nxt]
                    an = a[nxt]
                    sn = tn if tn > an else an
                    ok = sn <= lat[pos] + EPS
                    delta = dist[prev][cust] + dist_c[nxt] - dist[prev][nxt]
                else:
                    ok = start + dc + dist_c[0] <= b0 + EPS
                    delta = dist[prev][cust] + dist_c[0] - dist[prev][0]
                if ok and (rbest_delta is None or delta < rbest_delta - EPS):
                    rbest_delta = delta
                    rbest_pos = pos
            if pos < n_seq:
                prev = seq[pos]
                depart = times[pos] + dur[prev]
        if rbest_delta is not None:
            if best is None or rbest_delta < best[0] - EPS:
                second = best
                best = (rbest_delta, ri, rbest_pos)
            elif second is None or rbest_delta < second[0] - EPS:
                second = (rbest_delta, ri, rbest_pos)
    if len(sol.routes) < ctx.cap_for(inst):
        counter += 1
        start = ac if ac > dist[0][cust] else dist[0][cust]
        if start <= bc + EPS and start + dc + dist[cust][0] <= b0 + EPS:
            delta = dist[0][cust] + dist[cust][0]
            cand = (delta, len(sol.routes), 0)
            if best is None or delta < best[0] - EPS:
                second = best
                best = cand
            elif second is None or delta < second[0] - EPS:
                second = cand
    ctx.insertion_counter += counter
    if best is None:
        raise NoFeasibleInsertion(cust)
    rep = InsertionReport(cust, best[1], best[2], best[0])
    if second is not None:
        rep.second_route, rep.second_position, rep.second_delta = \
            second[1], second[2], second[0]
    return rep


def apply_insertion(sol: Solution, cust: int, route: int, position: int):
    if route == len(sol.routes):
        sol.routes.append(Route())
    r = sol.routes[route]
    r.seq.insert(position, cust)
    sol.D += sol._recompute(r)
    sol._reindex(route)
    sol.unassigned.discard(cust)


def push(inst, sol: Solution, cust: int, ctx: EvalContext) -> InsertionReport:
    """Insert at the feasible position of minimal length increase."""
    if cust not in sol.unassigned:
        raise ValueError(f"customer {cust} is not unassigned")
    rep = plan_push(sol, cust, ctx)
    apply_insertion(sol, cust, rep.route, rep.position)
    return rep


def pull(inst, sol: Solution, cust: int) -> RemovalReport:
    """Remove a customer; downstream times can only shrink, so the rest stays feasible."""
    ri = sol.route_of[cust]
    if ri < 0:
        raise ValueError(f"customer {cust} is not assigned")
    r = sol.routes[ri]
    pos = sol.pos_of[cust]
    r.seq.pop(pos)
    sol.route_of[cust] = -1
    sol.pos_of[cust] = -1
    sol.unassigned.add(cust)
    if not r.seq:
        sol.D -= r.length
        delta = r.length
        sol.routes.pop(ri)
        for k in range(ri, len(sol.routes)):
            sol._reindex(k)
        return RemovalReport(cust, ri, pos, delta)
    delta = -sol._recompute(r)
    sol.D += -delta
    sol._reindex(ri)
    return RemovalReport(cust, ri, pos, delta)


def objective(inst, sol: Solution, ctx: EvalContext) -> float:
    """Penalized value: routes above target cost E*1e6, plus travel, plus
    the constant duration sum (keeps partial solutions comparable)."""
    E = len(sol.routes)
    excess = E - ctx.eopt_for(inst)
    factor = min(1, max(0, excess))
    return E * ROUTE_PENALTY * factor + sol.D + inst.sum_d


def validate(inst, sol: Solution) -> list[Violation]:
    """Check every stored invariant; empty list means the solution is sound."""
    out = []
    dist, dur, a, b = inst.dist, inst.d, inst.a, inst.b
    seen = {}
    total_len = 0.0
    for ri, r in enumerate(sol.routes):
        if not r.seq:
            out.append(Violation("cache", ri, None, "empty route kept in list"))
            continue
        load = 0
        length = 0.0
        prev = 0
        t_prev = 0.0
        for pos, cst in enumerate(r.seq):
            if cst in seen:
                out.append(Violation("coverage", ri, cst,
                                     f"also appears in route {seen[cst]}"))
            elif cst in sol.unassigned:
                out.append(Violation("coverage", ri, cst,
                                     "assigned but also in unassigned pool"))
            seen[cst] = ri
            load += inst.c[cst]
            length += dist[prev][cst]
            t = r.times[pos] if pos < len(r.times) else None
            if t is None:
                out.append(Violation("cache", ri, cst, "missing service time"))
                t = t_prev
            else:
                if t < a[cst] - VAL_TOL or t > b[cst] + VAL_TOL:
                    out.append(Violation("window", ri, cst,
                                         f"t={t:.3f} outside [{a[cst]}, {b[cst]}]"))
                if t < dist[0][cst] - VAL_TOL:
                    out.append(Violation("window", ri, cst,
                                         f"t={t:.3f} before earliest arrival {dist[0][cst]:.3f}"))
                wait = t_prev + (dur[prev] if prev else 0.0) + dist[prev][cst]
                if pos > 0 and t < wait - VAL_TOL:
                    out.append(Violation("chronology", ri, cst,
                                         f"t={t:.3f} before {wait:.3f} reachable from {prev}"))
            prev = cst
            t_prev = t
        length += dist[prev][0]
        ret = t_prev + dur[prev] + dist[prev][0]
        if ret > b[0] + VAL_TOL:
            out.append(Violation("window", ri, prev,
                                 f"depot return {ret:.3f} after horizon {b[0]}"))
        if load > inst.C:
            out.append(Violation("capacity", ri, None,
                                 f"load {load} exceeds capacity {inst.C}"))
        if abs(load - r.load) > VAL_TOL:
            out.append(Violation("cache", ri, None,
                                 f"cached load {r.load} != {load}"))
        if abs(length - r.length) > VAL_TOL:
            out.append(Violation("cache", ri, None,
                                 f"cached length {r.length:.6f} != {length:.6f}"))
        total_len += length
    for cst in range(1, inst.n + 1):
        if cst not in seen and cst not in sol.unassigned:
            out.append(Violation("coverage", None, cst, "missing from every route"))
    if abs(total_len - sol.D) > VAL_TOL * max(1.0, len(sol.routes)):
        out.append(Violation("cache", None, None,
                             f"cached travel {sol.D:.6f} != {total_len:.6f}"))
    return out


def solution_to_dict(inst, sol: Solution, ctx: EvalContext | None = None) -> dict:
    doc = {
        "instance": inst.id,
        "routes": [list(r.seq) for r in sol.routes],
        "times": {str(cst): sol.time_of(cst)
                  for r in sol.routes for cst in r.seq},
        "unassigned": sorted(sol.unassigned),
        "E": len(sol.routes),
        "D": sol.D,
    }
    if ctx is not None:
        doc["value"] = objective(inst, sol, ctx)
    return doc
