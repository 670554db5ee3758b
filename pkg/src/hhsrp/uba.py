"""Upper-bound constructive heuristic.

Four stages: cluster patients per caregiver (qualification-aware k-means
with a workload rebalance), group caregiver clusters into vehicles, route
each vehicle with an exact tour (nearest neighbour plus 2-opt above the exact
cap) while respecting the working time, and finally relocate patients
between vehicles.  The result never drops a caregiver; ``apply_dp_postpass``
adds drops afterwards.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .alns.local_search import dp_local_search
from .core import Instance, Solution, objective
from .oracle import held_karp_tsp

log = logging.getLogger(__name__)

KMEANS_MAX_ITER = 100
TSP_CAP = 18


@dataclass
class UbaReport:
    """Diagnostics of one construction."""

    kmeans_iterations: int = 0
    kmeans_converged: bool = True
    tsp_fallback: list[int] = field(default_factory=list)
    relocations: int = 0


def _centroid(inst: Instance, patients, default=None):
    if not patients:
        return default
    return inst.coords[list(patients)].mean(axis=0)


def stage1_clusters(inst: Instance, report: UbaReport | None = None) -> list[list[int]]:
    """One patient cluster per caregiver; each patient goes to a caregiver qualified for it."""
    report = report if report is not None else UbaReport()
    n, L = inst.n, inst.n_caregivers
    coords = inst.coords
    far = np.hypot(coords[:, 0], coords[:, 1])
    pool = set(range(1, n + 1))
    clusters = [[] for _ in range(L)]

    def farthest_for(l):
        cand = [i for i in pool if inst.can_treat(l, i)]
        return max(cand, key=lambda i: (far[i], -i)) if cand else None

    for l in range(L):
        i = farthest_for(l)
        if i is not None:
            clusters[l].append(i)
            pool.discard(i)
    for l in range(L):
        if clusters[l]:
            continue
        # borrow from a donor that can spare a patient
        best = None
        for d in range(L):
            if d == l or not clusters[d]:
                continue
            refill = farthest_for(d)
            if len(clusters[d]) < 2 and refill is None:
                continue
            cen = _centroid(inst, clusters[d])
            for i in clusters[d]:
                if inst.can_treat(l, i):
                    key = (float(np.hypot(*(coords[i] - cen))), far[i], -i)
                    if best is None or key > best[0]:
                        best = (key, d, i)
        if best is None:
            continue
        _, d, i = best
        clusters[d].remove(i)
        clusters[l].append(i)
        if not clusters[d]:
            j = farthest_for(d)
            clusters[d].append(j)
            pool.discard(j)

    centroids = [_centroid(inst, c, np.zeros(2)) for c in clusters]
    where = {i: l for l, c in enumerate(clusters) for i in c}
    it = 0
    converged = False
    while it < KMEANS_MAX_ITER:
        it += 1
        moved = False
        for i in range(1, n + 1):
            qual = inst.qualified(i)
            d = [float(np.hypot(*(coords[i] - centroids[l]))) for l in qual]
            target = qual[int(np.argmin(d))]
            src = where.get(i)
            if src == target:
                continue
            if src is not None:
                clusters[src].remove(i)
                centroids[src] = _centroid(inst, clusters[src], centroids[src])
            clusters[target].append(i)
            centroids[target] = _centroid(inst, clusters[target])
            where[i] = target
            moved = True
        if not moved:
            converged = True
            break
    if not converged:
        log.warning("cluster assignment stopped after %d iterations without converging", it)
    report.kmeans_iterations = it
    report.kmeans_converged = converged

    # workload rebalance
    p = inst.service
    cap = p[1:].sum() / L + p[1:].max() if n else 0.0
    load = [p[c].sum() if c else 0.0 for c in clusters]
    spill = []
    for l in range(L):
        while load[l] > cap and len(clusters[l]) > 1:
            cen = centroids[l]
            i = max(clusters[l], key=lambda v: (float(np.hypot(*(coords[v] - cen))), -v))
            clusters[l].remove(i)
            load[l] -= p[i]
            spill.append(i)
            centroids[l] = _centroid(inst, clusters[l], centroids[l])
    for i in spill:
        qual = inst.qualified(i)
        order = sorted(qual, key=lambda l: (float(np.hypot(*(coords[i] - centroids[l]))), l))
        fit = [l for l in order if load[l] + p[i] <= cap]
        l = fit[0] if fit else order[0]
        clusters[l].append(i)
        load[l] += p[i]
        centroids[l] = _centroid(inst, clusters[l])
    return [sorted(c) for c in clusters]


def stage2_vehicles(inst: Instance, clusters) -> list[tuple[int, ...]]:
    """Group caregiver clusters into vehicle crews of the instance capacity."""
    K, c = inst.n_vehicles, inst.capacity
    cen = {l: _centroid(inst, ps) for l, ps in enumerate(clusters) if ps}
    weight = {l: len(ps) for l, ps in enumerate(clusters)}
    crews = [[] for _ in range(K)]
    vcen = [None] * K
    left = sorted(cen)
    for k in range(K):
        if not left:
            break
        if k == 0:
            dist = {l: float(np.hypot(*cen[l])) for l in left}
        else:
            seeded = [vcen[j] for j in range(k)]
            dist = {l: min(float(np.hypot(*(cen[l] - s))) for s in seeded) for l in left}
        l = max(left, key=lambda x: (dist[x], -x))
        crews[k].append(l)
        vcen[k] = cen[l]
        left.remove(l)
    while left:
        best = None
        for l in left:
            for k in range(K):
                if len(crews[k]) >= c:
                    continue
                d = float(np.hypot(*(cen[l] - vcen[k]))) if vcen[k] is not None else float(np.hypot(*cen[l]))
                if best is None or (d, l, k) < best:
                    best = (d, l, k)
        d, l, k = best
        crews[k].append(l)
        left.remove(l)
        w = np.array([weight[x] for x in crews[k]], dtype=float)
        vcen[k] = (np.array([cen[x] for x in crews[k]]) * w[:, None]).sum(axis=0) / w.sum()
    idle = [l for l in range(inst.n_caregivers) if l not in cen]
    for k in range(K):
        while len(crews[k]) < c:
            crews[k].append(idle.pop(0))
    return [tuple(sorted(cr)) for cr in crews]


def nearest_neighbour_2opt(nodes, t) -> tuple[list[int], float]:
    """Heuristic closed tour from location 0 (used above the exact cap)."""
    t = np.asarray(t, dtype=float)
    left = list(nodes)
    tour = [0]
    while left:
        cur = tour[-1]
        nxt = min(left, key=lambda v: (t[cur, v], v))
        tour.append(nxt)
        left.remove(nxt)
    tour.append(0)
    improved = True
    while improved:
        improved = False
        for a in range(1, len(tour) - 2):
            for b in range(a + 1, len(tour) - 1):
                delta = (t[tour[a - 1], tour[b]] + t[tour[a], tour[b + 1]]
                         - t[tour[a - 1], tour[a]] - t[tour[b], tour[b + 1]])
                if delta < -1e-12:
                    tour[a:b + 1] = tour[a:b + 1][::-1]
                    improved = True
    length = float(sum(t[tour[i], tour[i + 1]] for i in range(len(tour) - 1)))
    return tour, length


def _tour(inst: Instance, patients, k: int, report: UbaReport, fallback: bool, cap: int):
    if len(patients) + 1 > cap:
        if not fallback:
            raise ValueError(f"vehicle {k} has {len(patients)} patients; raise the tour cap or shrink clusters")
        report.tsp_fallback.append(k)
        return nearest_neighbour_2opt(patients, inst.dist)
    return held_karp_tsp(patients, inst.dist, cap=cap)


def _span(inst: Instance, tour) -> float:
    d = inst.dist
    return float(sum(d[tour[i], tour[i + 1]] for i in range(len(tour) - 1)) + inst.service[tour[1:-1]].sum())


def _detour(inst: Instance, tour, pos: int) -> float:
    d = inst.dist
    a, v, b = tour[pos - 1], tour[pos], tour[pos + 1]
    return float(d[a, v] + d[v, b] - d[a, b])


def stage3_routes(inst: Instance, clusters, crews, report: UbaReport | None = None,
                  fallback: bool = True, cap: int = TSP_CAP):
    """Tour per vehicle; patients that break the working time move on to a later qualified vehicle."""
    report = report if report is not None else UbaReport()
    owner = {i: l for l, ps in enumerate(clusters) for i in ps}
    tours, server, unvisited = [], {}, []
    pushed = {}
    for k, crew in enumerate(crews):
        mine = sorted([i for l in crew for i in clusters[l]] + pushed.pop(k, []))
        tour, _ = _tour(inst, mine, k, report, fallback, cap)
        span = _span(inst, tour)
        while span > inst.w_time + 1e-9 and len(tour) > 2:
            pos = max(range(1, len(tour) - 1),
                      key=lambda x: (_detour(inst, tour, x) + inst.service[tour[x]], -tour[x]))
            i = tour.pop(pos)
            span = _span(inst, tour)
            nxt = next((j for j in range(k + 1, len(crews)) if any(inst.can_treat(l, i) for l in crews[j])), None)
            if nxt is None:
                unvisited.append(i)
            else:
                pushed.setdefault(nxt, []).append(i)
        for i in tour[1:-1]:
            l = owner.get(i)
            if l not in crew:
                l = next(x for x in crew if inst.can_treat(x, i))
            server[i] = l
        tours.append(tour)
    return tours, server, sorted(unvisited)


def stage4_improve(inst: Instance, tours, crews, server, unvisited, report: UbaReport | None = None):
    """Best-improvement relocation between vehicles, then greedy re-insertion of unvisited patients."""
    report = report if report is not None else UbaReport()
    tours = [list(t) for t in tours]
    server = dict(server)
    d = inst.dist
    p = inst.service
    spans = [_span(inst, t) for t in tours]
    limit = inst.w_time + 1e-9
    while True:
        best = None
        for k1, t1 in enumerate(tours):
            for a in range(1, len(t1) - 1):
                i = t1[a]
                save = _detour(inst, t1, a)
                for k2, t2 in enumerate(tours):
                    if k2 == k1:
                        continue
                    qual = [l for l in crews[k2] if inst.can_treat(l, i)]
                    if not qual:
                        continue
                    for b in range(len(t2) - 1):
                        add = d[t2[b], i] + d[i, t2[b + 1]] - d[t2[b], t2[b + 1]]
                        if spans[k2] + add + p[i] > limit:
                            continue
                        gain = len(crews[k1]) * save - len(crews[k2]) * add + (len(crews[k1]) - len(crews[k2])) * p[i]
                        if gain > 1e-9 and (best is None or gain > best[0]):
                            best = (gain, k1, a, k2, b, qual[0])
        if best is None:
            break
        _, k1, a, k2, b, l = best
        i = tours[k1].pop(a)
        tours[k2].insert(b + 1, i)
        server[i] = l
        spans[k1] = _span(inst, tours[k1])
        spans[k2] = _span(inst, tours[k2])
        report.relocations += 1
    left = []
    for i in sorted(unvisited):
        best = None
        for k, t in enumerate(tours):
            qual = [l for l in crews[k] if inst.can_treat(l, i)]
            if not qual:
                continue
            for b in range(len(t) - 1):
                add = d[t[b], i] + d[i, t[b + 1]] - d[t[b], t[b + 1]]
                if spans[k] + add + p[i] <= limit and (best is None or add < best[0]):
                    best = (add, k, b, qual[0])
        if best is None:
            left.append(i)
            continue
        _, k, b, l = best
        tours[k].insert(b + 1, i)
        server[i] = l
        spans[k] = _span(inst, tours[k])
    return tours, server, left


def to_solution(inst: Instance, tours, crews, server) -> Solution:
    routes = [[0] + list(t[1:-1]) + [inst.end] for t in tours]
    return Solution(inst.n, routes, [tuple(c) for c in crews], {i: server[i] for r in routes for i in r[1:-1]})


def uba_solve(inst: Instance, fallback: bool = True, cap: int = TSP_CAP, report: UbaReport | None = None):
    """Return ``(solution, mu)`` where ``mu`` is the solution's objective."""
    report = report if report is not None else UbaReport()
    clusters = stage1_clusters(inst, report)
    crews = stage2_vehicles(inst, clusters)
    tours, server, unvisited = stage3_routes(inst, clusters, crews, report, fallback, cap)
    tours, server, unvisited = stage4_improve(inst, tours, crews, server, unvisited, report)
    sol = to_solution(inst, tours, crews, server)
    return sol, objective(sol, inst).total


def apply_dp_postpass(sol: Solution, inst: Instance) -> Solution:
    """Add profitable drops to a solution; the objective never increases."""
    return dp_local_search(sol, inst)
