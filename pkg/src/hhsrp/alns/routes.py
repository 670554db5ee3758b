"""Small helpers shared by the operators."""
from __future__ import annotations

from ..core import Instance, Solution, route_makespan


def crew_mask(crew) -> int:
    m = 0
    for l in crew:
        m |= 1 << int(l)
    return m


def lowest_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def gap_masks(route, crew, server, drops, n: int) -> list[int]:
    """Caregivers aboard on each arc ``route[g] -> route[g + 1]``."""
    aboard = crew_mask(crew)
    out = []
    for node in route[:-1]:
        if 1 <= node <= n:
            if node in drops:
                aboard &= ~(1 << server[node])
        elif n < node <= 2 * n:
            aboard |= 1 << server[node - n]
        out.append(aboard)
    return out


def makespans(sol: Solution, inst: Instance) -> list[float]:
    return [route_makespan(r, sol.server, sol.drops, inst) for r in sol.routes]


def routed_patients(sol: Solution) -> list[int]:
    n = sol.n_patients
    return sorted(v for r in sol.routes for v in r if 1 <= v <= n)
