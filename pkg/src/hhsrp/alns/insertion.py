"""Repair-by-insertion operators (greedy and regret-k, optionally noisy).

A patient can go on any arc of a route on which some caregiver qualified for
it is aboard; the cheapest such caregiver (lowest index) becomes its server
and the vehicle waits there.  Costs are travel detours.  Working-time limits
are ignored here and enforced afterwards by the repair step.
"""
from __future__ import annotations

import numpy as np

from ..core import Instance, Solution, route_makespan
from .routes import gap_masks, lowest_bit


class _Costs:
    """Insertion costs of a fixed patient bank, cached per route."""

    def __init__(self, sol: Solution, inst: Instance, bank, noise: float, rng):
        self.sol = sol
        self.inst = inst
        self.bank = np.asarray(bank, dtype=int)
        self.can = np.array([inst.can_mask[i] for i in bank], dtype=np.int64)
        self.amp = noise * float(inst.dist.max())
        self.rng = rng
        self.blocks = [None] * len(sol.routes)
        self.masks = [None] * len(sol.routes)

    def block(self, k: int) -> np.ndarray:
        if self.blocks[k] is None:
            sol, inst = self.sol, self.inst
            route = sol.routes[k]
            masks = gap_masks(route, sol.crews[k], sol.server, sol.drops, inst.n)
            a = np.array(route[:-1])
            b = np.array(route[1:])
            tt = inst.tt
            c = tt[np.ix_(self.bank, a)] + tt[np.ix_(self.bank, b)] - tt[a, b]
            if self.amp:
                c += self.amp * self.rng.uniform(-1.0, 1.0, size=c.shape)
            feas = (self.can[:, None] & np.array(masks, dtype=np.int64)[None, :]) != 0
            c[~feas] = np.inf
            self.blocks[k] = c
            self.masks[k] = masks
        return self.blocks[k]

    def invalidate(self, k: int) -> None:
        self.blocks[k] = None

    def matrix(self):
        blocks = [self.block(k) for k in range(len(self.sol.routes))]
        offsets = np.cumsum([0] + [b.shape[1] for b in blocks])
        return np.concatenate(blocks, axis=1), offsets


def _place(sol: Solution, costs: _Costs, m: int, k: int, g: int) -> None:
    mask = costs.masks[k][g] & costs.inst.can_mask[m]
    sol.routes[k].insert(g + 1, m)
    sol.server[m] = lowest_bit(mask)
    costs.invalidate(k)


def _locate(col: int, offsets) -> tuple[int, int]:
    k = int(np.searchsorted(offsets, col, side="right") - 1)
    return k, col - int(offsets[k])


def insert(sol: Solution, inst: Instance, bank, rng=None, k: int = 1, noise: float = 0.0) -> Solution:
    """Greedy (``k == 1``) or regret-``k`` insertion of ``bank``.

    Patients without any feasible position stay unvisited.
    """
    out = sol.copy()
    bank = sorted(set(int(i) for i in bank))
    if not bank:
        return out
    costs = _Costs(out, inst, bank, noise, rng)
    active = np.ones(len(bank), dtype=bool)
    ids = np.array(bank)
    while active.any():
        C, offsets = costs.matrix()
        C[~active] = np.inf
        if k <= 1 or C.shape[1] < 2:
            c1 = C.min(axis=1)
            if not np.isfinite(c1).any():
                break
            row = int(np.argmin(c1))
        else:
            kk = min(k, C.shape[1])
            part = np.sort(np.partition(C, kk - 1, axis=1)[:, :kk], axis=1)
            c1 = part[:, 0]
            ok = np.isfinite(c1)
            if not ok.any():
                break
            with np.errstate(invalid="ignore"):
                regret = (part[:, 1:] - c1[:, None]).sum(axis=1)
            if kk < k:
                regret[:] = np.inf
            regret[~ok] = -np.inf
            c1 = np.where(ok, c1, np.inf)
            order = np.lexsort((ids, c1, -regret))
            row = int(order[0])
        col = int(np.argmin(C[row]))
        kv, g = _locate(col, offsets)
        _place(out, costs, int(ids[row]), kv, g)
        active[row] = False
    return out


def insert_within_limit(sol: Solution, inst: Instance, bank) -> Solution:
    """Greedy insertion that only accepts positions keeping the route within the working time."""
    out = sol.copy()
    bank = sorted(set(int(i) for i in bank))
    if not bank:
        return out
    costs = _Costs(out, inst, bank, 0.0, None)
    active = np.ones(len(bank), dtype=bool)
    ids = np.array(bank)
    limit = inst.w_time + 1e-9
    spans = [route_makespan(r, out.server, out.drops, inst) for r in out.routes]
    while active.any():
        C, offsets = costs.matrix()
        C[~active] = np.inf
        flat = np.argsort(C, axis=None, kind="stable")
        done = False
        for idx in flat:
            row, col = divmod(int(idx), C.shape[1])
            if not np.isfinite(C[row, col]):
                break
            m = int(ids[row])
            kv, g = _locate(col, offsets)
            route = out.routes[kv]
            if any(v in out.drops for v in route):
                trial = route[:g + 1] + [m] + route[g + 1:]
                span = route_makespan(trial, out.server, out.drops, inst)
            else:
                span = spans[kv] + C[row, col] + inst.p_list[m]
            if span <= limit:
                _place(out, costs, m, kv, g)
                spans[kv] = route_makespan(out.routes[kv], out.server, out.drops, inst)
                active[row] = False
                done = True
                break
        if not done:
            break
    return out


INSERTIONS = {
    "greedy": dict(k=1, noise=False),
    "regret2": dict(k=2, noise=False),
    "regret3": dict(k=3, noise=False),
    "greedy_noise": dict(k=1, noise=True),
    "regret2_noise": dict(k=2, noise=True),
    "regret3_noise": dict(k=3, noise=True),
}
