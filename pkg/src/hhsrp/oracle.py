"""Exact reference solvers for tiny instances.

``exact_solve`` enumerates crew partitions and, for every crew, runs a
label-setting dynamic program over (served set, position, dropped
caregivers).  Because all times propagate through sums and maxima, a label
that is no later in every component dominates; only non-dominated labels are
kept.  Vehicle routes are then combined by a subset DP.
"""
from __future__ import annotations

from itertools import permutations

import numpy as np

from .core import Instance, Objective, Solution, crew_partitions, objective

MAX_PATIENTS = 6
MAX_CAREGIVERS = 4
MAX_VEHICLES = 2


class _Label:
    __slots__ = ("time", "ends", "parent", "action")

    def __init__(self, time, ends, parent, action):
        self.time = time
        self.ends = ends
        self.parent = parent
        self.action = action


def _dominated(lab, labels) -> bool:
    for o in labels:
        if o.time <= lab.time + 1e-12 and all(a <= b + 1e-12 for a, b in zip(o.ends, lab.ends)):
            return True
    return False


def _insert_label(bucket, key, lab) -> None:
    labels = bucket.setdefault(key, [])
    if _dominated(lab, labels):
        return
    labels[:] = [o for o in labels
                 if not (lab.time <= o.time and all(a <= b for a, b in zip(lab.ends, o.ends)))]
    labels.append(lab)


def crew_routes(inst: Instance, crew, allow_drops: bool) -> dict[int, tuple[float, _Label]]:
    """Minimum return time for every set of patients one crew can serve.

    Keys are bitmasks over patients (bit ``i - 1`` for patient ``i``).
    """
    n = inst.n
    dist = inst.dist.tolist()
    p = inst.p_list
    c = len(crew)
    qual = [[j for j, l in enumerate(crew) if inst.can_treat(l, i)] if i else [] for i in range(n + 1)]
    limit = inst.w_time + 1e-9
    buckets = [dict() for _ in range(2 * n + 1)]
    buckets[0][(0, 0, (0,) * c)] = [_Label(0.0, (0.0,) * c, None, None)]
    best: dict[int, tuple[float, _Label]] = {}
    for phi in range(2 * n + 1):
        for (S, loc, D), labels in buckets[phi].items():
            for lab in labels:
                if all(d == 0 for d in D):
                    span = lab.time + dist[loc][0]
                    if span <= limit and (S not in best or span < best[S][0] - 1e-12):
                        best[S] = (span, lab)
                for m in range(1, n + 1):
                    if S >> (m - 1) & 1:
                        continue
                    aboard = [j for j in qual[m] if D[j] == 0]
                    if not aboard:
                        continue
                    arr = lab.time + dist[loc][m]
                    if arr + dist[m][0] > limit:
                        continue
                    S2 = S | 1 << (m - 1)
                    _insert_label(buckets[phi + 2], (S2, m, D),
                                  _Label(arr + p[m], lab.ends, lab, ("wait", m, crew[aboard[0]])))
                    if allow_drops:
                        for j in aboard:
                            D2 = D[:j] + (m,) + D[j + 1:]
                            ends = lab.ends[:j] + (arr + p[m],) + lab.ends[j + 1:]
                            _insert_label(buckets[phi + 1], (S2, m, D2),
                                          _Label(arr, ends, lab, ("drop", m, crew[j])))
                for j, i in enumerate(D):
                    if i == 0:
                        continue
                    arr = max(lab.time + dist[loc][i], lab.ends[j])
                    if arr + dist[i][0] > limit:
                        continue
                    D2 = D[:j] + (0,) + D[j + 1:]
                    ends = lab.ends[:j] + (0.0,) + lab.ends[j + 1:]
                    _insert_label(buckets[phi + 1], (S, i, D2), _Label(arr, ends, lab, ("pick", i, crew[j])))
    return best


def _unwind(lab: _Label, n: int):
    steps = []
    while lab is not None and lab.action is not None:
        steps.append(lab.action)
        lab = lab.parent
    steps.reverse()
    route, server, drops = [0], {}, set()
    for kind, i, l in steps:
        if kind == "pick":
            route.append(i + n)
        else:
            route.append(i)
            server[i] = l
            if kind == "drop":
                drops.add(i)
    route.append(2 * n + 1)
    return route, server, drops


def _submasks(mask: int):
    s = mask
    while True:
        yield s
        if s == 0:
            return
        s = (s - 1) & mask


def exact_solve(inst: Instance, variant: str = "VS") -> tuple[Solution, Objective]:
    """Optimal solution of a tiny instance.

    ``variant`` is ``VS`` (drops allowed), ``M`` (no drops) or ``STD``
    (one caregiver per vehicle, no drops).  For ``STD`` the solution refers to
    ``inst.single_caregiver()``.
    """
    if inst.n > MAX_PATIENTS or inst.n_caregivers > MAX_CAREGIVERS or inst.n_vehicles > MAX_VEHICLES:
        raise ValueError(f"oracle handles at most {MAX_PATIENTS} patients, {MAX_CAREGIVERS} caregivers "
                         f"and {MAX_VEHICLES} vehicles")
    if variant not in ("VS", "M", "STD"):
        raise ValueError(f"unknown variant {variant!r}")
    work = inst.single_caregiver() if variant == "STD" else inst
    n = work.n
    full = (1 << n) - 1
    table = {}
    best_total, best_plan = np.inf, None
    for part in crew_partitions(range(work.n_caregivers), work.capacity):
        for crew in part:
            if crew not in table:
                table[crew] = crew_routes(work, crew, variant == "VS")
        # g maps covered set -> (cost, chosen subsets)
        g = {0: (0.0, ())}
        for crew in part:
            vals = table[crew]
            nxt = {}
            for U, (cost, chosen) in g.items():
                rest = full & ~U
                for S in _submasks(rest):
                    if S == 0:
                        add = 0.0
                    elif S in vals:
                        add = len(crew) * vals[S][0]
                    else:
                        continue
                    key = U | S
                    if key not in nxt or cost + add < nxt[key][0] - 1e-12:
                        nxt[key] = (cost + add, chosen + (S,))
            g = nxt
        for U, (cost, chosen) in g.items():
            total = cost + work.unv * (n - bin(U).count("1"))
            if total < best_total - 1e-9:
                best_total, best_plan = total, (part, chosen)
    part, chosen = best_plan
    sol = Solution(n, [], [])
    for crew, S in zip(part, chosen):
        if S:
            route, server, drops = _unwind(table[crew][S][1], n)
        else:
            route, server, drops = [0, 2 * n + 1], {}, set()
        sol.routes.append(route)
        sol.crews.append(tuple(crew))
        sol.server.update(server)
        sol.drops |= drops
    return sol, objective(sol, work)


def held_karp_tsp(nodes, t, cap: int = 18) -> tuple[list[int], float]:
    """Shortest closed tour from location 0 through ``nodes``.

    ``t`` is a square travel-time matrix indexed by location.  ``cap`` bounds
    the number of tour nodes including the start.  Ties resolve to the lowest
    index.
    """
    nodes = [int(v) for v in nodes]
    m = len(nodes)
    if m + 1 > cap:
        raise ValueError(f"{m + 1} nodes exceed the exact tour cap of {cap}")
    if m == 0:
        return [0, 0], 0.0
    t = np.asarray(t, dtype=float)
    idx = [0] + nodes
    D = t[np.ix_(idx, idx)]
    N = 1 << m
    dp = np.full((N, m), np.inf)
    parent = np.full((N, m), -1, dtype=np.int16)
    for j in range(m):
        dp[1 << j, j] = D[0, j + 1]
    masks = np.arange(N)
    pc = np.zeros(N, dtype=np.int64)
    for b in range(m):
        pc += (masks >> b) & 1
    step = D[1:, 1:]
    for size in range(2, m + 1):
        layer = masks[pc == size]
        for j in range(m):
            sub = layer[(layer >> j) & 1 == 1]
            cand = dp[sub ^ (1 << j)] + step[:, j][None, :]
            arg = np.argmin(cand, axis=1)
            dp[sub, j] = cand[np.arange(len(sub)), arg]
            parent[sub, j] = arg
    total = dp[N - 1] + D[1:, 0]
    j = int(np.argmin(total))
    length = float(total[j])
    order = []
    mask = N - 1
    while j >= 0:
        order.append(nodes[j])
        prev = int(parent[mask, j])
        mask ^= 1 << j
        j = prev if mask else -1
    order.reverse()
    return [0] + order + [0], length


def brute_force_tsp(nodes, t) -> float:
    """Tour length by full enumeration (reference for small sets)."""
    nodes = list(nodes)
    if not nodes:
        return 0.0
    t = np.asarray(t, dtype=float)
    perms = np.array(list(permutations(nodes)))
    length = t[0, perms[:, 0]] + t[perms[:, -1], 0]
    length = length + t[perms[:, :-1], perms[:, 1:]].sum(axis=1)
    return float(length.min())

