"""Pheromone-guided reshuffling of vehicle crews.

Pairs of caregivers that share a vehicle in good solutions accumulate
pheromone.  New crews are grown from a random seed caregiver by binary
tournaments on the pheromone summed over the crew built so far.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import Instance, Solution


def visibility_matrix(inst: Instance, kind: str) -> np.ndarray:
    """Pairwise caregiver visibility.

    ``unique`` counts patients treatable by exactly one caregiver of the pair,
    ``common`` counts patients treatable by both.
    """
    can = np.zeros((inst.n_caregivers, inst.n), dtype=bool)
    for i in range(1, inst.n + 1):
        can[:, i - 1] = inst.qualification[:, inst.illness[i]]
    a = can[:, None, :]
    b = can[None, :, :]
    if kind == "unique":
        eta = (a ^ b).sum(axis=2)
    elif kind == "common":
        eta = (a & b).sum(axis=2)
    elif kind == "none":
        eta = np.zeros((inst.n_caregivers, inst.n_caregivers))
    else:
        raise ValueError(f"unknown visibility {kind!r}")
    eta = eta.astype(float)
    np.fill_diagonal(eta, 0.0)
    return eta


@dataclass
class PheromoneState:
    tau: np.ndarray
    eta: np.ndarray

    @classmethod
    def start(cls, inst: Instance, kind: str, f_init: float) -> "PheromoneState":
        eta = visibility_matrix(inst, kind)
        off = eta[~np.eye(len(eta), dtype=bool)]
        base = off.mean() if off.size and off.mean() > 0 else 1.0
        tau = np.full_like(eta, base / f_init)
        np.fill_diagonal(tau, 0.0)
        return cls(tau, eta)

    def update(self, crews, f_best: float, rho: float) -> None:
        """Reinforce the pairs that currently share a vehicle."""
        for crew in crews:
            for x in crew:
                for y in crew:
                    if x != y:
                        self.tau[x, y] = (1 - rho) * self.tau[x, y] + rho * self.eta[x, y] / f_best


def build_crews(tau: np.ndarray, n_vehicles: int, capacity: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    left = list(range(n_vehicles * capacity))
    crews = []
    for _ in range(n_vehicles):
        crew = [left.pop(int(rng.integers(len(left))))]
        while len(crew) < capacity:
            if len(left) == 1:
                crew.append(left.pop())
                continue
            a, b = rng.choice(len(left), size=2, replace=False)
            sa = tau[left[a], crew].sum()
            sb = tau[left[b], crew].sum()
            if sa == sb:
                pick = a if rng.random() < 0.5 else b
            else:
                pick = a if sa > sb else b
            crew.append(left.pop(int(pick)))
        crews.append(tuple(sorted(crew)))
    return crews


def caregiver_swap(sol: Solution, inst: Instance, state: PheromoneState, rng: np.random.Generator,
                   f_best: float, rho: float):
    """Update pheromone, rebuild all crews and evict patients whose caregiver moved away."""
    state.update(sol.crews, f_best, rho)
    out = sol.copy()
    out.crews = build_crews(state.tau, len(sol.crews), inst.capacity, rng)
    n = inst.n
    evicted = []
    for route, crew in zip(out.routes, out.crews):
        evicted += [v for v in route if 1 <= v <= n and out.server[v] not in crew]
    for i in evicted:
        out.remove_patient(i)
    return out, sorted(evicted)
