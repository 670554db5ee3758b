"""Simulated-annealing ALNS driver."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..core import Instance, Solution, total_cost
from .insertion import INSERTIONS, insert
from .local_search import dp_local_search
from .params import AlnsParams
from .removal import REMOVALS
from .repair import repair
from .swap import PheromoneState, caregiver_swap


def temperature(t0: float, cooling: float, t: int) -> float:
    """Temperature after ``t`` iterations."""
    return t0 * cooling ** t


def remove_count(n: int, t: int, params: AlnsParams) -> int:
    """Patients to remove at iteration ``t``; shrinks linearly from max_remove*n to min_remove*n."""
    t = min(t, params.theta)
    q = params.max_remove * n - n * (params.max_remove - params.min_remove) * t / params.theta
    return max(1, min(n, int(math.floor(q + 0.5))))


def accept(f_new: float, f_curr: float, temp: float, rng: np.random.Generator) -> bool:
    if f_new < f_curr:
        return True
    if temp <= 0:
        return False
    return rng.random() < math.exp(-(f_new - f_curr) / temp)


def select_operator(names, rng: np.random.Generator) -> str:
    """Uniform choice among operator names."""
    return names[int(rng.integers(len(names)))]


class IterationControl:
    """Iteration counter with restart and stopping rules.

    Iterations are numbered from 1.  A restart is due whenever the number of
    iterations since the last improvement is a positive multiple of
    ``omega``; the search stops after iteration ``t`` once ``t >= theta`` and
    ``t - t_best >= theta_extra``.
    """

    def __init__(self, theta: int, theta_extra: int, omega: int):
        self.theta = theta
        self.theta_extra = theta_extra
        self.omega = omega
        self.t = 1
        self.t_best = 1

    def restart_due(self) -> bool:
        return self.t > self.t_best and (self.t - self.t_best) % self.omega == 0

    def improved(self) -> None:
        self.t_best = self.t

    def finished(self) -> bool:
        return self.t >= self.theta and self.t - self.t_best >= self.theta_extra

    def advance(self) -> None:
        self.t += 1


@dataclass
class RunReport:
    best: Solution
    objective: float
    variant: str
    seed: int
    iterations: int
    best_iteration: int
    restarts: int
    n_drops: int
    n_unvisited: int
    initial_objective: float
    cpu_ms: float
    trajectory: list[float] = field(default_factory=list)
    instance: Instance | None = None


def random_crews(n_vehicles: int, capacity: int, rng: np.random.Generator):
    perm = rng.permutation(n_vehicles * capacity)
    return [tuple(sorted(int(x) for x in perm[k * capacity:(k + 1) * capacity])) for k in range(n_vehicles)]


def initial_solution(inst: Instance, params: AlnsParams, rng: np.random.Generator) -> Solution:
    sol = Solution.empty(inst, random_crews(inst.n_vehicles, inst.capacity, rng))
    sol = insert(sol, inst, range(1, inst.n + 1), rng, k=3, noise=params.noise)
    return repair(sol, inst)


def problem_for(inst: Instance, params: AlnsParams) -> Instance:
    return inst.single_caregiver() if params.variant == "STD" else inst


def run(inst: Instance, params: AlnsParams | None = None, trace=None) -> RunReport:
    """Run one search.

    ``trace``, if given, is called once per iteration with a dict describing
    the iteration (counters, temperature, objectives and operators used).
    For the single-caregiver variant the returned solution refers to the
    transformed instance, available as ``report.instance``.
    """
    params = params or AlnsParams()
    start = time.process_time()
    rng = np.random.default_rng(params.seed)
    inst = problem_for(inst, params)
    removals = ["random", "worst", "shaw", "route"] + (["dummy"] if params.uses_drops else [])
    insertions = list(INSERTIONS)

    current = initial_solution(inst, params, rng)
    f_curr = f_init = total_cost(current, inst)
    best, f_best = current, f_curr
    t0 = params.t0 if params.t0 is not None else params.t0_factor * f_init
    pher = PheromoneState.start(inst, params.visibility, f_init) if params.uses_swap else None
    ctl = IterationControl(params.theta, params.theta_extra, params.omega)
    trajectory = []
    restarts = 0
    n = inst.n
    settled = set()
    while True:
        t = ctl.t
        temp = temperature(t0, params.cooling, t - 1)
        q = remove_count(n, t, params)
        restart = ctl.restart_due()
        if restart:
            restarts += 1
            current, f_curr = best, f_best
            rname, iname = "random", "regret3"
        else:
            rname = select_operator(removals, rng)
            iname = select_operator(insertions, rng)
        partial, bank = REMOVALS[rname](current, inst, q, rng, params)
        swapped = False
        if pher is not None and t % params.phi == 0:
            partial, evicted = caregiver_swap(partial, inst, pher, rng, f_best, params.evaporation)
            bank = bank + evicted
            swapped = True
        bank = sorted(set(bank) | set(partial.unvisited))
        spec = INSERTIONS[iname]
        cand = insert(partial, inst, bank, rng, k=spec["k"], noise=params.noise if spec["noise"] else 0.0)
        if params.uses_drops:
            cand = dp_local_search(cand, inst, settled)
        cand = repair(cand, inst)
        f_new = total_cost(cand, inst)
        accepted = accept(f_new, f_curr, temp, rng)
        if accepted:
            current, f_curr = cand, f_new
        if f_new < f_best - 1e-9:
            best, f_best = cand, f_new
            ctl.improved()
        trajectory.append(f_best)
        if trace is not None:
            trace(dict(t=t, t_best=ctl.t_best, restart=restart, swap=swapped, q=q,
                       temperature=temperature(t0, params.cooling, t), removal=rname, insertion=iname,
                       f_new=f_new, f_curr=f_curr, f_best=f_best, accepted=accepted))
        if ctl.finished():
            break
        ctl.advance()
    return RunReport(best=best, objective=f_best, variant=params.variant, seed=params.seed,
                     iterations=ctl.t, best_iteration=ctl.t_best, restarts=restarts,
                     n_drops=len(best.drops), n_unvisited=len(best.unvisited), initial_objective=f_init,
                     cpu_ms=1000.0 * (time.process_time() - start), trajectory=trajectory, instance=inst)
