"""push/pull primitives, feasibility closure, objective and validation."""

import math
import random

import pytest

from routeforge import data
from routeforge.model import Instance
from routeforge.solution import (EvalContext, NoFeasibleInsertion, Solution,
                                 build_from_routes, objective, pull, push,
                                 solution_to_dict, validate)

from oracles import (brute_best_insertion, brute_insertions, random_instance,
                     replay, suffix_feasible, total_length)


def same_solution(x, y):
    if len(x.routes) != len(y.routes) or x.unassigned != y.unassigned:
        return False
    if x.D != y.D:
        return False
    for rx, ry in zip(x.routes, y.routes):
        if rx.seq != ry.seq or rx.times != ry.times:
            return False
        if rx.load != ry.load or rx.length != ry.length:
            return False
    return True


def build_random(inst, rng, ctx, frac=1.0):
    """Push a random subset of customers in random order; skip the stuck ones."""
    sol = Solution(inst)
    order = list(range(1, inst.n + 1))
    rng.shuffle(order)
    for cust in order[:int(inst.n * frac)]:
        try:
            push(inst, sol, cust, ctx)
        except NoFeasibleInsertion:
            pass
    return sol


def test_push_empty_solution():
    rng = random.Random(1)
    inst = random_instance(rng, 4)
    sol = Solution(inst)
    ctx = EvalContext(seed=1)
    rep = push(inst, sol, 3, ctx)
    assert rep.route == 0 and rep.position == 0
    assert rep.delta == pytest.approx(inst.dist[0][3] + inst.dist[3][0])
    assert sol.routes[0].seq == [3]
    assert sol.E == 1
    assert 3 not in sol.unassigned
    assert ctx.insertion_counter == 1
    assert validate(inst, sol) == []


def test_push_matches_bruteforce():
    # exhaustive minimum over all feasible insertion points, many instances
    rng = random.Random(20260822)
    for trial in range(60):
        inst = random_instance(rng, rng.randint(2, 8))
        ctx = EvalContext(seed=trial)
        sol = Solution(inst)
        order = list(range(1, inst.n + 1))
        rng.shuffle(order)
        for cust in order:
            seqs = [list(r.seq) for r in sol.routes]
            cands = brute_insertions(inst, seqs, cust, ctx.cap_for(inst))
            try:
                rep = push(inst, sol, cust, ctx)
            except NoFeasibleInsertion:
                assert not cands
                continue
            assert cands
            best = min(cands)
            assert rep.delta == pytest.approx(best[0], abs=1e-6)
            gap = sorted(c[0] for c in cands)
            if len(gap) == 1 or gap[1] - gap[0] > 1e-6:
                assert (rep.route, rep.position) == (best[1], best[2])
            # second-best route = cheapest insertion outside the chosen route
            others = [c for c in cands if c[1] != rep.route]
            if rep.second_route is not None:
                assert others
                assert rep.second_delta == pytest.approx(min(others)[0], abs=1e-6)
                assert rep.second_route != rep.route
            else:
                assert not others
        assert validate(inst, sol) == []


def test_push_infeasible_leaves_state():
    # window closes before the depot travel time can be covered
    inst = Instance("X", [(0.0, 0.0), (30.0, 40.0), (1.0, 0.0)],
                    [0, 5, 5], [0, 0, 0], [0.0, 0.0, 0.0],
                    [1000.0, 20.0, 1000.0], 50, 3)
    sol = Solution(inst)
    ctx = EvalContext(seed=0)
    push(inst, sol, 2, ctx)
    snap = sol.clone()
    before = ctx.insertion_counter
    with pytest.raises(NoFeasibleInsertion):
        push(inst, sol, 1, ctx)  # d(0,1)=50 > b_1=20
    assert same_solution(sol, snap)
    assert 1 in sol.unassigned
    assert ctx.insertion_counter > before  # failed evaluations still count


def test_counter_accounting():
    rng = random.Random(5)
    inst = random_instance(rng, 6, fleet=6)
    sol = Solution(inst)
    ctx = EvalContext(seed=5)
    push(inst, sol, 1, ctx)
    assert ctx.insertion_counter == 1  # just the fresh-route candidate
    push(inst, sol, 2, ctx)
    assert ctx.insertion_counter == 3  # one open route + fresh
    n_routes = sol.E
    push(inst, sol, 3, ctx)
    assert ctx.insertion_counter == 3 + n_routes + 1


def test_pull_push_inverse():
    rng = random.Random(99)
    for trial in range(30):
        inst = random_instance(rng, rng.randint(3, 9))
        ctx = EvalContext(seed=trial)
        sol = build_random(inst, rng, ctx)
        assigned = [i for i in range(1, inst.n + 1) if i not in sol.unassigned]
        if not assigned:
            continue
        cust = rng.choice(assigned)
        d_before = sol.D
        e_before = sol.E
        rep = pull(inst, sol, cust)
        assert cust in sol.unassigned
        assert sol.E >= e_before - 1
        assert rep.delta >= -1e-9
        assert sol.D == pytest.approx(d_before - rep.delta)
        assert validate(inst, sol) == []
        push(inst, sol, cust, ctx)
        # the old slot is still available, so the greedy can only match or beat it
        assert sol.D <= d_before + 1e-6
        assert validate(inst, sol) == []


def test_pull_last_customer_drops_route():
    # loads force one route each; pulling 1 must drop its route and reindex 2
    inst = Instance("TWO", [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)],
                    [0, 30, 30], [0, 0, 0], [0.0, 0.0, 0.0],
                    [1000.0, 1000.0, 1000.0], 50, 3)
    sol = build_from_routes(inst, [[1], [2]])
    assert sol.E == 2
    rep = pull(inst, sol, 1)
    assert sol.E == 1
    assert rep.delta == pytest.approx(20.0)
    assert sol.routes[0].seq == [2]
    assert sol.route_of[2] == 0 and sol.pos_of[2] == 0
    assert 1 in sol.unassigned
    assert validate(inst, sol) == []


def test_feasibility_closure():
    # any interleaving of pushes and pulls keeps every invariant intact
    rng = random.Random(424242)
    for trial in range(25):
        inst = random_instance(rng, rng.randint(4, 12))
        ctx = EvalContext(seed=trial)
        sol = Solution(inst)
        for step in range(60):
            pool = sorted(sol.unassigned)
            assigned = [i for i in range(1, inst.n + 1)
                        if i not in sol.unassigned]
            if assigned and (not pool or rng.random() < 0.4):
                pull(inst, sol, rng.choice(assigned))
            elif pool:
                try:
                    push(inst, sol, rng.choice(pool), ctx)
                except NoFeasibleInsertion:
                    pass
            if step % 15 == 0:
                assert validate(inst, sol) == []
        assert validate(inst, sol) == []
        # index arrays agree with the route lists
        for ri, r in enumerate(sol.routes):
            for pos, cst in enumerate(r.seq):
                assert sol.route_of[cst] == ri
                assert sol.pos_of[cst] == pos


def test_closure_on_benchmark():
    inst = data.load_instance("R101")
    ctx = EvalContext(seed=7)
    rng = random.Random(7)
    sol = build_random(inst, rng, ctx)
    assert validate(inst, sol) == []
    assert sol.D == pytest.approx(
        total_length(inst, [r.seq for r in sol.routes]), abs=1e-6)


def test_latest_start_cache():
    rng = random.Random(11)
    for trial in range(20):
        inst = random_instance(rng, rng.randint(3, 8))
        ctx = EvalContext(seed=trial)
        sol = build_random(inst, rng, ctx)
        for r in sol.routes:
            for pos in range(len(r.seq)):
                lim = r.lat[pos]
                assert suffix_feasible(inst, r.seq, pos, lim)
                assert not suffix_feasible(inst, r.seq, pos, lim + 1e-3)
                assert r.times[pos] <= lim + 1e-9


def test_objective_branches():
    rng = random.Random(2)
    inst = random_instance(rng, 5, fleet=5)
    ctx = EvalContext(seed=2, mode="trucks", eopt={inst.id: 5})
    sol = Solution(inst)
    # empty solution: no routes, no travel, only the duration constant
    assert objective(inst, sol, ctx) == pytest.approx(inst.sum_d)
    for cust in range(1, 6):
        push(inst, sol, cust, ctx)
    base = objective(inst, sol, ctx)
    assert base == pytest.approx(sol.D + inst.sum_d)  # E <= target: no penalty
    # dropping the target below E switches the penalty on at E * 1e6
    tight = EvalContext(seed=2, mode="trucks", eopt={inst.id: sol.E - 1})
    assert objective(inst, sol, tight) == pytest.approx(
        sol.E * 1_000_000.0 + sol.D + inst.sum_d)
    # deeper excess does not grow the factor further (min(1, .) cap)
    tighter = EvalContext(seed=2, mode="trucks", eopt={inst.id: sol.E - 3})
    assert objective(inst, sol, tighter) == objective(inst, sol, tight)
    # travel mode never charges the penalty
    travel = EvalContext(seed=2, mode="travel")
    assert objective(inst, sol, travel) == pytest.approx(sol.D + inst.sum_d)


def test_objective_monotone_in_travel():
    rng = random.Random(8)
    inst = random_instance(rng, 6)
    ctx = EvalContext(seed=8)
    sol = build_random(inst, rng, ctx)
    val = objective(inst, sol, ctx)
    sol2 = sol.clone()
    sol2.D += 10.0
    assert objective(inst, sol2, ctx) == pytest.approx(val + 10.0)


def test_trucks_mode_requires_target():
    rng = random.Random(9)
    inst = random_instance(rng, 3)
    ctx = EvalContext(seed=9, mode="trucks")
    sol = Solution(inst)
    with pytest.raises(ValueError):
        objective(inst, sol, ctx)
    inst.E_opt = 3
    assert objective(inst, sol, ctx) == pytest.approx(inst.sum_d)


def test_validate_flags_violations():
    rng = random.Random(13)
    inst = random_instance(rng, 6, fleet=6)
    ctx = EvalContext(seed=13)
    sol = build_random(inst, rng, ctx)
    assert sol.E >= 2

    dup = sol.clone()
    extra = dup.routes[0].seq[0]
    dup.routes[1].seq.append(extra)
    dup.routes[1].times.append(dup.routes[1].times[-1] + 1)
    kinds = {v.kind for v in validate(inst, dup)}
    assert "coverage" in kinds

    fat = sol.clone()
    fat.routes[0].load = inst.C + 1  # cache out of sync
    assert any(v.kind == "cache" for v in validate(inst, fat))

    late = sol.clone()
    late.routes[0].times[0] = inst.b[late.routes[0].seq[0]] + 5.0
    kinds = {v.kind for v in validate(inst, late)}
    assert "window" in kinds or "chronology" in kinds

    early = sol.clone()
    if len(early.routes[0].seq) >= 2:
        early.routes[0].times[1] = early.routes[0].times[0] - 1.0
        kinds = {v.kind for v in validate(inst, early)}
        assert kinds & {"chronology", "window"}

    broken = sol.clone()
    broken.D += 5.0
    assert any(v.kind == "cache" for v in validate(inst, broken))

    lost = sol.clone()
    victim = lost.routes[0].seq[0]
    lost.routes[0].seq.pop(0)
    lost.routes[0].times.pop(0)
    out = validate(inst, lost)
    assert any(v.kind == "coverage" and v.cust == victim for v in out)


def test_capacity_violation_detected():
    inst = Instance("CAP", [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)],
                    [0, 30, 30], [0, 0, 0], [0.0, 0.0, 0.0],
                    [100.0, 100.0, 100.0], 50, 2)
    sol = build_from_routes(inst, [[1, 2]])
    out = validate(inst, sol)
    assert any(v.kind == "capacity" for v in out)


def test_determinism():
    for seed in (0, 1, 2):
        outs = []
        for _ in range(2):
            rng = random.Random(seed)
            inst = random_instance(rng, 8)
            ctx = EvalContext(seed=seed)
            sol = build_random(inst, rng, ctx, frac=0.8)
            outs.append((solution_to_dict(inst, sol, ctx),
                         ctx.insertion_counter, ctx.rng.random()))
        assert outs[0] == outs[1]


def test_clone_independence():
    rng = random.Random(21)
    inst = random_instance(rng, 6)
    ctx = EvalContext(seed=21)
    sol = build_random(inst, rng, ctx)
    snap = sol.clone()
    assigned = [i for i in range(1, inst.n + 1) if i not in sol.unassigned]
    pull(inst, sol, assigned[0])
    assert not same_solution(sol, snap)
    assert validate(inst, snap) == []


def test_export_roundtrip():
    rng = random.Random(31)
    inst = random_instance(rng, 7)
    ctx = EvalContext(seed=31)
    sol = build_random(inst, rng, ctx)
    doc = solution_to_dict(inst, sol, ctx)
    assert doc["instance"] == inst.id
    assert doc["E"] == sol.E
    assert doc["D"] == pytest.approx(sol.D)
    assert doc["value"] == pytest.approx(objective(inst, sol, ctx))
    times = {int(k): v for k, v in doc["times"].items()}
    rebuilt = build_from_routes(inst, doc["routes"], times=times)
    assert validate(inst, rebuilt) == []
    assert rebuilt.D == pytest.approx(sol.D)
    # hand-corrupted times are caught
    times[doc["routes"][0][0]] += 1e6
    bad = build_from_routes(inst, doc["routes"], times=times)
    assert validate(inst, bad) != []
