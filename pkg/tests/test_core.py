import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hhsrp import Instance, Solution
from hhsrp.core import (CaregiverNotAboardError, DummyBeforePatientError, StructureError,
                        UnreturnedCaregiverError, check_feasibility, crew_partitions, evaluate, objective,
                        route_makespan, total_cost)
from hhsrp.instancegen import InstanceClassSpec, generate

from conftest import make_instance


def hand_trace(route, server, drops, coords, service):
    """Independent step-by-step schedule of one route (returns the return time)."""
    n = len(coords) - 1
    loc = lambda v: coords[v if v <= n else (v - n if v <= 2 * n else 0)]
    clock, here, finish = 0.0, loc(0), {}
    for v in route[1:]:
        there = loc(v)
        clock += ((there[0] - here[0]) ** 2 + (there[1] - here[1]) ** 2) ** 0.5
        here = there
        if 1 <= v <= n:
            if v in drops:
                finish[v] = clock + service[v]
            else:
                clock += service[v]
        elif n < v <= 2 * n:
            clock = max(clock, finish.pop(v - n))
    return clock


def test_travel_time_examples(ex1):
    inst, _ = ex1
    assert inst.travel_time(0, 1) == 5.0
    assert inst.travel_time(1, 1 + inst.n) == 0.0
    assert inst.travel_time(1, 1) == 0.0
    assert inst.travel_time(0, inst.end) == 0.0
    with pytest.raises(ValueError):
        inst.travel_time(0, 99)


def test_example_one_flow(ex1):
    inst, sol = ex1
    tl = evaluate(sol, inst)
    assert tl.ah[inst.end, 0] == tl.ah[inst.end, 1] == 20.0
    obj = objective(sol, inst, tl)
    assert obj.total == 40.0 and obj.penalty == 0.0
    assert check_feasibility(sol, inst) == []


def test_example_two_drop_and_pick(ex2):
    inst, sol = ex2
    coords = [(0, 0), (5, 0), (5, 3)]
    expected = hand_trace(sol.routes[0], sol.server, sol.drops, coords, [0, 10, 4])
    assert expected == pytest.approx(20.0)
    tl = evaluate(sol, inst)
    assert tl.av[3, 0] == pytest.approx(15.0)
    assert tl.w[3, 0] == pytest.approx(0.0)
    assert tl.hw[3, 0] == pytest.approx(0.0)
    assert objective(sol, inst, tl).total == pytest.approx(40.0)
    assert check_feasibility(sol, inst) == []


def test_waiting_complementarity_at_pickup():
    # vehicle arrives early: it waits, the dropped caregiver does not
    inst = make_instance([(5.0, 0.0), (5.0, 1.0)], [30.0, 4.0])
    sol = Solution(2, [[0, 1, 2, 3, 5]], [(0, 1)], {1: 0, 2: 1}, {1})
    tl = evaluate(sol, inst)
    assert tl.w[3, 0] == pytest.approx(35.0 - 11.0)
    assert tl.hw[3, 0] == 0.0
    # vehicle arrives late: the caregiver waits
    inst = make_instance([(5.0, 0.0), (5.0, 10.0)], [2.0, 4.0])
    tl = evaluate(sol, inst)
    assert tl.w[3, 0] == 0.0
    assert tl.hw[3, 0] == pytest.approx(5 + 10 + 4 + 10 - 7.0)


def test_empty_routes():
    inst = make_instance([(1.0, 1.0), (2.0, 0.0)], [5.0, 5.0], unv=100.0)
    sol = Solution.empty(inst, [(0, 1)])
    obj = objective(sol, inst)
    assert obj.flow == 0.0 and obj.penalty == 200.0
    assert sol.unvisited == [1, 2]


def test_all_unvisited_penalty():
    inst = make_instance([(float(i), 0.0) for i in range(1, 11)], [5.0] * 10, unv=100.0)
    assert objective(Solution.empty(inst, [(0, 1)]), inst).total == 1000.0


def test_structural_errors(ex2):
    inst, sol = ex2
    bad = sol.copy()
    bad.routes[0] = [0, 3, 1, 2, 5]
    with pytest.raises(DummyBeforePatientError):
        evaluate(bad, inst)
    bad = sol.copy()
    bad.routes[0] = [0, 1, 2, 5]
    bad.drops = {1}
    with pytest.raises(UnreturnedCaregiverError):
        evaluate(bad, inst)
    bad = sol.copy()
    bad.server[2] = 0  # caregiver 0 is still at patient 1
    with pytest.raises(CaregiverNotAboardError):
        evaluate(bad, inst)
    assert issubclass(DummyBeforePatientError, StructureError)


def test_qualification_violation():
    inst = make_instance([(1.0, 0.0)], [5.0], illness=[1], qualification=[[1, 0], [0, 1]])
    sol = Solution(1, [[0, 1, 3]], [(0, 1)], {1: 0}, set())
    fams = {(v.family, v.key) for v in check_feasibility(sol, inst)}
    assert ("qualification", (1, 0)) in fams


def test_wtime_boundary(ex1):
    _, sol = ex1
    inst = make_instance([(3.0, 4.0)], [10.0], w_time=20.0)
    assert check_feasibility(sol, inst) == []
    inst = make_instance([(3.0, 4.0)], [11.0], w_time=20.0)
    fams = {(v.family, v.key) for v in check_feasibility(sol, inst)}
    assert ("wtime_caregiver", (0,)) in fams and ("wtime_vehicle", (0,)) in fams


def test_crew_violations(ex1):
    inst, sol = ex1
    bad = sol.copy()
    bad.crews = [(0,)]
    fams = {v.family for v in check_feasibility(bad, inst)}
    assert {"crew_size", "crew_partition"} <= fams


def test_crew_partitions_count():
    parts = list(crew_partitions(range(4), 2))
    assert len(parts) == 3
    assert len(list(crew_partitions(range(6), 2))) == 15


def test_no_drop_reduction_by_summation():
    inst = generate(InstanceClassSpec(6, 20, 1, 0, 7, n_caregivers=2))
    route = [0, 3, 1, 5, inst.end]
    sol = Solution(inst.n, [route], [(0, 1)], {3: 0, 1: 1, 5: 0}, set())
    travel = sum(inst.travel_time(a, b) for a, b in zip(route, route[1:]))
    stalls = sum(inst.service[i] for i in (3, 1, 5))
    tl = evaluate(sol, inst)
    for l in (0, 1):
        assert tl.ah[inst.end, l] == pytest.approx(travel + stalls)


def test_additivity_of_penalty(ex1):
    inst, sol = ex1
    empty = Solution.empty(inst, [(0, 1)])
    assert objective(empty, inst).penalty - objective(sol, inst).penalty == inst.unv


def test_round_trips(tmp_path, ex2):
    inst, sol = ex2
    inst.save(tmp_path / "i.json")
    back = Instance.load(tmp_path / "i.json")
    assert json.dumps(back.to_dict()) == json.dumps(inst.to_dict())
    sol.save(tmp_path / "s.json")
    again = Solution.load(tmp_path / "s.json")
    assert again.to_dict() == sol.to_dict()
    doc = sol.to_dict()
    doc["unvisited"] = [1]
    with pytest.raises(ValueError):
        Solution.from_dict(doc)


def test_instance_invariants():
    with pytest.raises(ValueError):
        make_instance([(1.0, 0.0)], [5.0], illness=[1], qualification=[[1, 0], [1, 0]])
    with pytest.raises(ValueError):
        make_instance([(1.0, 0.0)], [5.0], qualification=np.ones((3, 1)))
    inst = make_instance([(1.0, 0.0)], [5.0])
    with pytest.raises(ValueError):
        inst.coords[0, 0] = 9.0


def _random_solution(inst, rng):
    """Random structurally valid solution with drops."""
    crews = [tuple(range(2 * k, 2 * k + 2)) for k in range(inst.n_vehicles)]
    sol = Solution.empty(inst, crews)
    for i in rng.permutation(np.arange(1, inst.n + 1)):
        i = int(i)
        if rng.random() < 0.15:
            continue
        k = int(rng.integers(inst.n_vehicles))
        route = sol.routes[k]
        aboard = set(crews[k])
        for v in route[1:-1]:
            if v <= inst.n and v in sol.drops:
                aboard.discard(sol.server[v])
            elif v > inst.n:
                aboard.add(sol.server[v - inst.n])
        q = [l for l in sorted(aboard) if inst.can_treat(l, i)]
        if not q:
            continue
        route.insert(len(route) - 1, i)
        sol.server[i] = q[0]
        if len(aboard) > 1 and rng.random() < 0.5:
            sol.drops.add(i)
            route.insert(len(route) - 1, i + inst.n)
    return sol


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_objective_matches_independent_recomputation(seed):
    inst = generate(InstanceClassSpec(8, 20, seed % 3, 0, seed, n_caregivers=4))
    rng = np.random.default_rng(seed)
    sol = _random_solution(inst, rng)
    tl = evaluate(sol, inst)
    coords = [tuple(c) for c in inst.coords]
    manual = 0.0
    for route, crew in zip(sol.routes, sol.crews):
        manual += len(crew) * hand_trace(route, sol.server, sol.drops, coords, list(inst.service))
    manual += inst.unv * len(sol.unvisited)
    assert objective(sol, inst, tl).total == pytest.approx(manual, abs=1e-9)
    assert total_cost(sol, inst) == pytest.approx(manual, abs=1e-9)
    assert sum(tl.ah[inst.end, l] for c in sol.crews for l in c) + inst.unv * len(sol.unvisited) == \
        pytest.approx(manual, abs=1e-9)
    for k, r in enumerate(sol.routes):
        assert route_makespan(r, sol.server, sol.drops, inst) == pytest.approx(tl.makespan[k])
        times = [tl.av[v, k] for v in r]
        assert all(a <= b + 1e-12 for a, b in zip(times, times[1:]))
    for (v, k), w in tl.w.items():
        if inst.n < v <= 2 * inst.n:
            assert w * tl.hw[v, sol.server[v - inst.n]] == 0.0
    assert evaluate(sol, inst) == tl
