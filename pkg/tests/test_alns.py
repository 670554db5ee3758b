import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hhsrp import Solution
from hhsrp.alns import (INSERTIONS, REMOVALS, AlnsParams, IterationControl, PheromoneState, accept, build_crews,
                        caregiver_swap, dp_local_search, dummy_count, insert, insert_within_limit, remove_count,
                        removal_gains, repair, run, select_operator, shaw_relatedness, temperature,
                        visibility_matrix)
from hhsrp.alns.routes import gap_masks
from hhsrp.core import check_feasibility, evaluate, route_makespan, total_cost
from hhsrp.instancegen import InstanceClassSpec, generate

from conftest import make_instance


@pytest.fixture(scope="module")
def inst():
    return generate(InstanceClassSpec(12, 20, 1, 0, 11, n_caregivers=4))


@pytest.fixture(scope="module")
def solved(inst):
    return run(inst, AlnsParams(theta=300, theta_extra=50, seed=1)).best


def random_full(inst, seed):
    rng = np.random.default_rng(seed)
    crews = [(0, 1), (2, 3)] if inst.n_vehicles == 2 else [(0, 1)]
    sol = insert(Solution.empty(inst, crews), inst, range(1, inst.n + 1), rng, k=2, noise=0.5)
    return sol


# parameters and formulas

def test_default_parameters():
    p = AlnsParams()
    assert (p.theta, p.theta_extra, p.omega, p.phi) == (25000, 2500, 250, 100)
    assert (p.min_remove, p.max_remove, p.shaw_alpha, p.shaw_beta) == (0.1, 0.5, 0.3, 0.1)
    assert (p.dummy_min, p.dummy_max, p.noise, p.cooling, p.evaporation) == (0.5, 0.8, 0.1, 0.99975, 0.95)
    assert p.uses_drops and p.uses_swap
    assert not p.with_(variant="M").uses_drops
    assert not p.with_(variant="STD").uses_swap
    assert not p.with_(visibility="none").uses_swap


def test_params_round_trip(tmp_path):
    p = AlnsParams(theta=10, visibility="common")
    assert AlnsParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        AlnsParams.from_dict({"thetta": 3})
    with pytest.raises(ValueError):
        AlnsParams(variant="X")
    with pytest.raises(ValueError):
        AlnsParams(min_remove=0.6)


def test_temperature_law():
    assert temperature(100.0, 0.99975, 0) == 100.0
    assert temperature(100.0, 0.99975, 1000) == pytest.approx(100.0 * 0.99975 ** 1000, rel=1e-12)


def test_remove_count_endpoints():
    p = AlnsParams()
    assert remove_count(30, 0, p) == 15
    assert remove_count(30, p.theta, p) == 3
    assert remove_count(30, 10 * p.theta, p) == 3
    assert remove_count(1, 0, p) == 1
    counts = [remove_count(30, t, p) for t in range(0, p.theta + 1, 500)]
    assert counts == sorted(counts, reverse=True)


def test_accept():
    rng = np.random.default_rng(0)
    assert accept(9.0, 10.0, 0.0, rng)
    assert not accept(11.0, 10.0, 0.0, rng)
    hits = sum(accept(11.0, 10.0, 1.0, rng) for _ in range(20000))
    assert hits / 20000 == pytest.approx(math.exp(-1.0), abs=0.01)


def test_operator_selection_is_uniform():
    rng = np.random.default_rng(5)
    names = list(INSERTIONS)
    counts = Counter(select_operator(names, rng) for _ in range(100_000))
    for name in names:
        assert counts[name] / 100_000 == pytest.approx(1 / len(names), rel=0.03)


def test_iteration_control():
    ctl = IterationControl(theta=10, theta_extra=4, omega=3)
    restarts = []
    while True:
        if ctl.restart_due():
            restarts.append(ctl.t)
        if ctl.t == 5:
            ctl.improved()
        if ctl.finished():
            break
        ctl.advance()
    assert restarts == [4, 8]
    assert ctl.t == 10


def test_dummy_count_bounds():
    rng = np.random.default_rng(1)
    assert dummy_count(0, 0.5, 0.8, rng) == 0
    assert dummy_count(1, 0.5, 0.8, rng) == 1
    seen = {dummy_count(10, 0.5, 0.8, rng) for _ in range(500)}
    assert seen == {5, 6, 7, 8}


def test_shaw_relatedness():
    inst = make_instance([(3.0, 4.0), (0.0, 1.0)], [10.0, 30.0])
    assert shaw_relatedness(inst, 1, 2) == pytest.approx(0.3 * math.hypot(3, 3) + 0.1 * 20.0, abs=1e-9)


# removal

@pytest.mark.parametrize("name", ["random", "worst", "shaw"])
def test_removal_counts(inst, solved, name):
    rng = np.random.default_rng(3)
    partial, removed = REMOVALS[name](solved, inst, 4, rng, AlnsParams())
    assert len(removed) == 4
    assert set(removed) <= set(solved.visited())
    assert not set(removed) & partial.visited()
    evaluate(partial, inst)
    assert solved.visited() == set(solved.visited())  # input untouched


def test_worst_removal_takes_largest_gains(inst, solved):
    gains = removal_gains(solved, inst)
    _, removed = REMOVALS["worst"](solved, inst, 3, None, AlnsParams())
    top = sorted(gains, key=lambda i: -gains[i])[:3]
    assert sorted(removed) == sorted(top)


def test_route_removal_empties_one_route(inst, solved):
    partial, removed = REMOVALS["route"](solved, inst, 1, np.random.default_rng(0), AlnsParams())
    assert any(r == [0, inst.end] for r in partial.routes)
    assert len(removed) == len(solved.visited()) - len(partial.visited())


def test_dummy_removal_keeps_patients():
    inst = generate(InstanceClassSpec(10, 10, 2, 0, 4, n_caregivers=4))
    sol = run(inst, AlnsParams(theta=300, theta_extra=50, seed=2)).best
    if not sol.drops:
        pytest.skip("no drops in this solution")
    partial, removed = REMOVALS["dummy"](sol, inst, 1, np.random.default_rng(0), AlnsParams())
    assert removed == []
    assert partial.visited() == sol.visited()
    d = len(sol.drops)
    assert math.ceil(0.5 * d) <= d - len(partial.drops) <= max(1, math.floor(0.8 * d))


# insertion

def test_greedy_picks_cheapest_detour(inst):
    sol = random_full(inst, 0)
    m = 5
    sol.remove_patient(m)
    best = math.inf
    for k, r in enumerate(sol.routes):
        masks = gap_masks(r, sol.crews[k], sol.server, sol.drops, inst.n)
        for g in range(len(r) - 1):
            if masks[g] & inst.can_mask[m]:
                a, b = r[g], r[g + 1]
                best = min(best, inst.tt[a, m] + inst.tt[m, b] - inst.tt[a, b])
    out = insert(sol, inst, [m])
    k = out.vehicle_of()[m]
    pos = out.routes[k].index(m)
    a, b = out.routes[k][pos - 1], out.routes[k][pos + 1]
    assert inst.tt[a, m] + inst.tt[m, b] - inst.tt[a, b] == pytest.approx(best)


@pytest.mark.parametrize("name", list(INSERTIONS))
def test_insertions_serve_with_qualified_aboard(inst, name):
    spec = INSERTIONS[name]
    rng = np.random.default_rng(7)
    sol = Solution.empty(inst, [(0, 2), (1, 3)])
    out = insert(sol, inst, range(1, inst.n + 1), rng, k=spec["k"], noise=0.1 if spec["noise"] else 0.0)
    assert out.visited() == set(range(1, inst.n + 1))
    fams = {v.family for v in check_feasibility(out, inst)}
    assert not fams & {"qualification", "assignment", "structure", "coverage"}


def test_unservable_patient_stays_in_bank():
    inst = make_instance([(1.0, 0.0), (2.0, 0.0)], [5.0, 5.0], illness=[0, 1],
                         qualification=[[1, 0], [1, 0], [0, 1], [0, 1]], vehicles=2)
    sol = Solution.empty(inst, [(0, 1), (2, 3)])
    sol.crews[1] = (0, 1)  # nobody aboard can treat illness 1
    out = insert(sol, inst, [1, 2])
    assert out.unvisited == [2]


def test_insert_within_limit_respects_wtime():
    inst = generate(InstanceClassSpec(30, 40, 2, 0, 3, n_caregivers=4, w_time=150.0))
    out = insert_within_limit(Solution.empty(inst, [(0, 1), (2, 3)]), inst, range(1, 31))
    assert all(route_makespan(r, out.server, out.drops, inst) <= 150.0 + 1e-9 for r in out.routes)
    assert out.unvisited


def test_repair_restores_feasibility():
    inst = generate(InstanceClassSpec(30, 40, 2, 0, 3, n_caregivers=4, w_time=200.0))
    sol = random_full(inst, 1)
    assert check_feasibility(sol, inst)
    fixed = repair(sol, inst)
    assert check_feasibility(fixed, inst) == []


# local search

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_dp_local_search_never_worsens(seed):
    inst = generate(InstanceClassSpec(10, 10 + 10 * (seed % 4), seed % 3, 0, seed, n_caregivers=4))
    sol = random_full(inst, seed)
    before = total_cost(sol, inst)
    after = dp_local_search(sol, inst)
    assert total_cost(after, inst) <= before + 1e-9
    assert after.visited() == sol.visited()
    evaluate(after, inst)


def test_dp_local_search_finds_obvious_drop():
    # long service at patient 1, a short visit nearby: dropping at 1 saves time
    inst = make_instance([(5.0, 0.0), (5.0, 3.0)], [30.0, 4.0])
    sol = Solution(2, [[0, 1, 2, 5]], [(0, 1)], {1: 0, 2: 1}, set())
    out = dp_local_search(sol, inst)
    assert out.drops == {1}
    assert total_cost(out, inst) < total_cost(sol, inst)


# caregiver swap

def test_visibility_counts():
    inst = make_instance([(1.0, 0.0), (2.0, 0.0), (3.0, 0.0)], [5.0] * 3, illness=[0, 1, 1],
                         qualification=[[1, 0], [0, 1], [1, 1], [1, 1]], vehicles=2)
    uniq = visibility_matrix(inst, "unique")
    common = visibility_matrix(inst, "common")
    assert uniq[0, 1] == 3 and common[0, 1] == 0
    assert uniq[2, 3] == 0 and common[2, 3] == 3
    assert uniq[0, 2] == 2 and common[0, 2] == 1
    assert np.all(np.diag(uniq) == 0)
    assert np.all(visibility_matrix(inst, "none") == 0)


def test_pheromone_start_and_update():
    inst = make_instance([(1.0, 0.0), (2.0, 0.0)], [5.0] * 2, illness=[0, 1],
                         qualification=[[1, 0], [0, 1], [1, 1], [1, 1]], vehicles=2)
    st_ = PheromoneState.start(inst, "unique", 100.0)
    eta = st_.eta
    tau0 = eta[~np.eye(4, dtype=bool)].mean() / 100.0
    assert st_.tau[0, 1] == pytest.approx(tau0)
    st_.update([(0, 1), (2, 3)], 50.0, 0.95)
    assert st_.tau[0, 1] == pytest.approx(0.05 * tau0 + 0.95 * eta[0, 1] / 50.0)
    assert st_.tau[0, 2] == pytest.approx(tau0)
    fallback = PheromoneState.start(inst, "none", 100.0)
    assert fallback.tau[0, 1] == pytest.approx(1 / 100.0)


def test_build_crews_partition():
    rng = np.random.default_rng(0)
    tau = rng.random((6, 6))
    for _ in range(50):
        crews = build_crews(tau, 3, 2, rng)
        assert sorted(l for c in crews for l in c) == list(range(6))


def test_build_crews_prefers_pheromone():
    tau = np.zeros((4, 4))
    tau[0, 1] = tau[1, 0] = tau[2, 3] = tau[3, 2] = 1.0
    rng = np.random.default_rng(1)
    together = sum(sorted(build_crews(tau, 2, 2, rng)) == [(0, 1), (2, 3)] for _ in range(400))
    assert together > 400 / 3 + 40


def test_caregiver_swap_evicts_orphans(inst, solved):
    state = PheromoneState.start(inst, "unique", 1000.0)
    out, evicted = caregiver_swap(solved, inst, state, np.random.default_rng(3), 1000.0, 0.95)
    for i in evicted:
        assert i not in out.visited()
    for i, (l, k) in out.assign.items():
        assert l in out.crews[k]
    evaluate(out, inst)


# full search

def test_run_is_feasible_and_reproducible(inst):
    p = AlnsParams(theta=200, theta_extra=50, seed=9)
    a, b = run(inst, p), run(inst, p)
    assert a.objective == b.objective and a.best.to_dict() == b.best.to_dict()
    assert check_feasibility(a.best, inst) == []
    assert a.objective == pytest.approx(total_cost(a.best, inst))
    assert a.objective <= a.initial_objective
    assert a.trajectory == sorted(a.trajectory, reverse=True)


def test_variants(inst):
    m = run(inst, AlnsParams(theta=150, theta_extra=20, variant="M"))
    assert not m.best.drops
    std = run(inst, AlnsParams(theta=150, theta_extra=20, variant="STD"))
    assert std.instance.capacity == 1 and len(std.best.crews) == inst.n_caregivers
    assert check_feasibility(std.best, std.instance) == []


def test_trace_and_swap_schedule(inst):
    rows = []
    run(inst, AlnsParams(theta=250, theta_extra=10, phi=50, seed=4), trace=rows.append)
    swaps = [r["t"] for r in rows if r["swap"]]
    assert swaps == [t for t in range(1, len(rows) + 1) if t % 50 == 0]
    assert all(r["removal"] != "dummy" for r in run_rows(inst, "M"))


def run_rows(inst, variant):
    rows = []
    run(inst, AlnsParams(theta=100, theta_extra=10, variant=variant), trace=rows.append)
    return rows
