"""Drop-and-pick-up local search.

For a patient at route position ``i`` served while the vehicle waits, we try
dropping its caregiver there and collecting it right after position ``j``.
Candidates are ranked by the estimated saving

    t(j, j+1) + p_i - (t(j, d) + max(0, av_i + p_i - (dv_j + t(j, d))) + t(d, j+1))

where ``d`` is the pick-up node of ``i`` and times come from the current
timeline.  The estimate ignores how later times shift once the wait at ``i``
disappears, so every window is kept and only the ranking uses it.  A
candidate is applied only if exact re-simulation confirms a shorter route;
otherwise the next one is tried.
"""
from __future__ import annotations

from ..core import Instance, Solution, route_makespan
from .routes import crew_mask

EPS = 1e-9


def _timeline(route, crew, server, drops, inst: Instance):
    """Arrival/departure per position and the crew aboard on arrival."""
    tt = inst.tt_list
    p = inst.p_list
    n = inst.n
    aboard = crew_mask(crew)
    av, dv, on = [0.0], [0.0], [aboard]
    time = 0.0
    pending = {}
    prev = 0
    for node in route[1:]:
        time += tt[prev][node]
        av.append(time)
        on.append(aboard)
        if node <= n:
            if node in drops:
                pending[node] = time + p[node]
                aboard &= ~(1 << server[node])
            else:
                time += p[node]
        elif node <= 2 * n:
            time = max(time, pending.pop(node - n))
            aboard |= 1 << server[node - n]
        dv.append(time)
        prev = node
    return av, dv, on


def _candidates(route, crew, server, drops, inst: Instance):
    n = inst.n
    tt = inst.tt_list
    p = inst.p_list
    av, dv, on = _timeline(route, crew, server, drops, inst)
    last = len(route) - 2
    out = []
    for a in range(1, last + 1):
        i = route[a]
        if i > n or i in drops:
            continue
        d = i + n
        for l in crew:
            if not (on[a] >> l & 1 and inst.can_mask[i] >> l & 1):
                continue
            moved = []
            for b in range(a + 1, last + 1):
                v = route[b]
                if v <= n and server[v] == l:
                    alt = on[b] & inst.can_mask[v] & ~(1 << l)
                    if v in drops or not alt:
                        break
                    moved.append(v)
                nxt = route[b + 1]
                score = (tt[v][nxt] + p[i]
                         - (tt[v][d] + max(0.0, av[a] + p[i] - (dv[b] + tt[v][d])) + tt[d][nxt]))
                out.append((-score, a, b, l, tuple(moved)))
    out.sort()
    return out, on


def _apply(route, server, a, b, l, moved, on, inst: Instance):
    i = route[a]
    new_route = route[:b + 1] + [i + inst.n] + route[b + 1:]
    new_server = dict(server)
    new_server[i] = l
    pos = {v: k for k, v in enumerate(route)}
    for v in moved:
        alt = on[pos[v]] & inst.can_mask[v] & ~(1 << l)
        new_server[v] = (alt & -alt).bit_length() - 1
    return new_route, new_server


def improve_route(sol: Solution, k: int, inst: Instance) -> bool:
    """Apply the best confirmed drop on route ``k`` in place; True if one was applied."""
    route = sol.routes[k]
    crew = sol.crews[k]
    if len(crew) < 2:
        return False
    base = route_makespan(route, sol.server, sol.drops, inst)
    cands, on = _candidates(route, crew, sol.server, sol.drops, inst)
    for _, a, b, l, moved in cands:
        new_route, new_server = _apply(route, sol.server, a, b, l, moved, on, inst)
        i = route[a]
        drops = sol.drops | {i}
        if route_makespan(new_route, new_server, drops, inst) < base - EPS:
            sol.routes[k] = new_route
            sol.server.update({v: new_server[v] for v in (i,) + moved})
            sol.drops.add(i)
            return True
    return False


def _signature(sol: Solution, k: int, n: int):
    route = sol.routes[k]
    return (tuple(route), sol.crews[k],
            tuple((sol.server[v], v in sol.drops) for v in route if 1 <= v <= n))


def dp_local_search(sol: Solution, inst: Instance, settled: set | None = None) -> Solution:
    """Add drops route by route until no confirmed saving remains.

    ``settled`` optionally remembers routes already known to admit no
    improving drop, so repeated calls can skip them.
    """
    out = sol.copy()
    for k in range(len(out.routes)):
        if settled is not None and _signature(out, k, inst.n) in settled:
            continue
        while improve_route(out, k, inst):
            pass
        if settled is not None:
            if len(settled) > 200000:
                settled.clear()
            settled.add(_signature(out, k, inst.n))
    return out
