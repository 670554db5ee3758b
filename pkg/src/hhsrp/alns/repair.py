from __future__ import annotations

from ..core import Instance, Solution, route_makespan
from .insertion import insert_within_limit


def trim_route(sol: Solution, k: int, inst: Instance) -> list[int]:
    """Drop patients from route ``k`` until it fits the working time.

    Each step removes the patient whose removal shortens the route most.
    Works in place and returns the removed patients.
    """
    n = inst.n
    removed = []
    limit = inst.w_time + 1e-9
    span = route_makespan(sol.routes[k], sol.server, sol.drops, inst)
    while span > limit:
        best = None
        route = sol.routes[k]
        for i in route:
            if 1 <= i <= n:
                rest = [v for v in route if v != i and v != i + n]
                s = route_makespan(rest, sol.server, sol.drops, inst)
                if best is None or s < best[0]:
                    best = (s, i)
        if best is None:
            break
        span, i = best
        sol.remove_patient(i)
        removed.append(i)
    return removed


def repair(sol: Solution, inst: Instance) -> Solution:
    """Restore working-time feasibility, then re-insert whatever still fits."""
    out = sol.copy()
    bank = []
    for k in range(len(out.routes)):
        bank += trim_route(out, k, inst)
    bank += out.unvisited
    return insert_within_limit(out, inst, bank)
