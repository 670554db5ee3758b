"""Destroy operators.

Each operator returns a new partial solution and the removed patients.
Removing a patient also removes its pick-up node and drop event.
"""
from __future__ import annotations

import math

import numpy as np

from ..core import Instance, Solution, route_makespan
from .routes import routed_patients


def remove_random(sol: Solution, inst: Instance, q: int, rng: np.random.Generator, params=None):
    out = sol.copy()
    pool = routed_patients(out)
    q = min(q, len(pool))
    removed = sorted(int(i) for i in rng.choice(pool, size=q, replace=False)) if q else []
    for i in removed:
        out.remove_patient(i)
    return out, removed


def removal_gains(sol: Solution, inst: Instance) -> dict[int, float]:
    """Objective decrease from removing each routed patient on its own."""
    gains = {}
    n = inst.n
    for r, crew in zip(sol.routes, sol.crews):
        base = route_makespan(r, sol.server, sol.drops, inst)
        for i in r:
            if 1 <= i <= n:
                rest = [v for v in r if v != i and v != i + n]
                gains[i] = len(crew) * (base - route_makespan(rest, sol.server, sol.drops, inst))
    return gains


def remove_worst(sol: Solution, inst: Instance, q: int, rng=None, params=None):
    gains = removal_gains(sol, inst)
    removed = sorted(sorted(gains, key=lambda i: (-gains[i], i))[:q])
    out = sol.copy()
    for i in removed:
        out.remove_patient(i)
    return out, removed


def shaw_relatedness(inst: Instance, i: int, j, alpha: float = 0.3, beta: float = 0.1):
    """Relatedness of patient ``i`` to ``j`` (lower is more related); ``j`` may be an array."""
    return alpha * inst.dist[i, j] + beta * np.abs(inst.service[i] - inst.service[j])


def remove_shaw(sol: Solution, inst: Instance, q: int, rng: np.random.Generator, params=None):
    alpha = params.shaw_alpha if params else 0.3
    beta = params.shaw_beta if params else 0.1
    pool = routed_patients(sol)
    q = min(q, len(pool))
    if not q:
        return sol.copy(), []
    last = int(pool[rng.integers(len(pool))])
    removed = [last]
    left = [i for i in pool if i != last]
    while len(removed) < q:
        cand = np.array(left)
        score = shaw_relatedness(inst, last, cand, alpha, beta)
        last = int(cand[np.argmin(score)])
        removed.append(last)
        left.remove(last)
    out = sol.copy()
    for i in removed:
        out.remove_patient(i)
    return out, sorted(removed)


def remove_route(sol: Solution, inst: Instance, q: int, rng: np.random.Generator, params=None):
    n = inst.n
    used = [k for k, r in enumerate(sol.routes) if any(1 <= v <= n for v in r)]
    if not used:
        return sol.copy(), []
    k = used[rng.integers(len(used))]
    removed = sorted(v for v in sol.routes[k] if 1 <= v <= n)
    out = sol.copy()
    for i in removed:
        out.remove_patient(i)
    return out, removed


def dummy_count(d: int, low: float, high: float, rng: np.random.Generator) -> int:
    """Number of pick-up nodes to remove when ``d`` exist."""
    if d <= 0:
        return 0
    lo = max(1, math.ceil(low * d))
    hi = max(lo, math.floor(high * d))
    return int(rng.integers(lo, hi + 1))


def remove_dummies(sol: Solution, inst: Instance, q: int, rng: np.random.Generator, params=None):
    """Turn a random share of drops back into waits; no patient leaves its route."""
    low = params.dummy_min if params else 0.5
    high = params.dummy_max if params else 0.8
    out = sol.copy()
    drops = sorted(out.drops)
    m = dummy_count(len(drops), low, high, rng)
    for i in rng.choice(drops, size=m, replace=False) if m else []:
        out.undrop(int(i))
    return out, []


REMOVALS = {
    "random": remove_random,
    "worst": remove_worst,
    "shaw": remove_shaw,
    "route": remove_route,
    "dummy": remove_dummies,
}
