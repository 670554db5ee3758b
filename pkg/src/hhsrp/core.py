"""Problem data, solutions and the exact evaluator.

Node numbering follows a single convention used across the package: for an
instance with ``n`` patients, node ``0`` is the care centre at departure,
nodes ``1..n`` are patients, node ``n + i`` is the pick-up ("dummy") node of
patient ``i`` (same location) and node ``2n + 1`` is the care centre on
return.  Caregivers are numbered ``0..|L|-1`` and vehicles ``0..|K|-1``.

A vehicle carries a crew of caregivers.  At a patient the vehicle either
waits for the service to finish, or it drops the serving caregiver and leaves
immediately; a dropped caregiver must later be collected at the dummy node of
that patient by the same vehicle.  The objective sums the return time of all
caregivers to the care centre plus a penalty per unvisited patient.
"""
from __future__ import annotations

import json
from itertools import combinations
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


class StructureError(ValueError):
    """A route sequence that cannot be simulated."""


class DummyBeforePatientError(StructureError):
    pass


class UnreturnedCaregiverError(StructureError):
    """A dropped caregiver is never collected."""


class CaregiverNotAboardError(StructureError):
    """A caregiver serves (or leaves) a node it never reached."""


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable problem data.

    Arrays are indexed by location: row 0 is the care centre and rows
    ``1..n`` are the patients.
    """

    coords: np.ndarray
    illness: np.ndarray
    service: np.ndarray
    qualification: np.ndarray
    n_vehicles: int
    capacity: int
    w_time: float = 600.0
    unv: float | None = None
    name: str = ""
    seed: int | None = None

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        illness = np.asarray(self.illness, dtype=int)
        service = np.asarray(self.service, dtype=float)
        qual = np.asarray(self.qualification, dtype=bool)
        if qual.ndim != 2:
            raise ValueError("qualification must be a caregivers x illnesses matrix")
        n = coords.shape[0] - 1
        if coords.shape != (n + 1, 2) or illness.shape != (n + 1,) or service.shape != (n + 1,):
            raise ValueError("coords, illness and service must cover the centre and every patient")
        if self.capacity < 1 or self.n_vehicles < 1:
            raise ValueError("need at least one vehicle with positive capacity")
        if qual.shape[0] != self.capacity * self.n_vehicles:
            raise ValueError(
                f"{qual.shape[0]} caregivers do not fill {self.n_vehicles} vehicles of capacity {self.capacity}"
            )
        if n and (illness[1:].min() < 0 or illness[1:].max() >= qual.shape[1]):
            raise ValueError("illness index out of range")
        if np.any(service[1:] < 0):
            raise ValueError("negative service time")
        for i in range(1, n + 1):
            if not qual[:, illness[i]].any():
                raise ValueError(f"no caregiver can treat patient {i}")
        illness = illness.copy()
        illness[0] = -1
        service = service.copy()
        service[0] = 0.0
        unv = 2.0 * float(self.w_time) if self.unv is None else float(self.unv)
        for name, value in (("coords", coords), ("illness", illness), ("service", service), ("qualification", qual)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "unv", unv)
        object.__setattr__(self, "w_time", float(self.w_time))

        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        dist.setflags(write=False)
        loc = self.location_of(np.arange(2 * n + 2))
        tt = dist[np.ix_(loc, loc)]
        tt.setflags(write=False)
        masks = [sum(1 << l for l in range(qual.shape[0]) if qual[l, s]) for s in range(qual.shape[1])]
        can = [0] + [masks[illness[i]] for i in range(1, n + 1)]
        object.__setattr__(self, "dist", dist)
        object.__setattr__(self, "tt", tt)
        object.__setattr__(self, "tt_list", tt.tolist())
        object.__setattr__(self, "p_list", [float(x) for x in service] + [0.0] * (n + 1))
        object.__setattr__(self, "can_mask", can)

    @property
    def n(self) -> int:
        return self.coords.shape[0] - 1

    @property
    def n_caregivers(self) -> int:
        return self.qualification.shape[0]

    @property
    def n_illnesses(self) -> int:
        return self.qualification.shape[1]

    @property
    def end(self) -> int:
        return 2 * self.n + 1

    @property
    def demand(self) -> np.ndarray:
        """Patients x illnesses 0/1 matrix (row 0 is the centre and all zero)."""
        d = np.zeros((self.n + 1, self.n_illnesses), dtype=int)
        d[np.arange(1, self.n + 1), self.illness[1:]] = 1
        return d

    def location_of(self, node):
        """Map node ids to location rows (vectorised)."""
        n = self.coords.shape[0] - 1
        node = np.asarray(node)
        loc = np.where(node > n, node - n, node)
        return np.where(node == 2 * n + 1, 0, loc)

    def travel_time(self, a: int, b: int) -> float:
        last = 2 * self.n + 1
        if not (0 <= a <= last and 0 <= b <= last):
            raise ValueError(f"unknown node in ({a}, {b}); ids run from 0 to {last}")
        return self.tt_list[a][b]

    def can_treat(self, caregiver: int, patient: int) -> bool:
        return bool(self.can_mask[patient] >> caregiver & 1)

    def qualified(self, patient: int) -> list[int]:
        m = self.can_mask[patient]
        return [l for l in range(self.n_caregivers) if m >> l & 1]

    def single_caregiver(self) -> "Instance":
        """The same patients served by one-caregiver vehicles, one per caregiver."""
        return Instance(self.coords, self.illness, self.service, self.qualification,
                        n_vehicles=self.n_caregivers, capacity=1, w_time=self.w_time,
                        unv=self.unv, name=self.name, seed=self.seed)

    def to_dict(self) -> dict:
        return {
            "format": "hhsrp-instance",
            "version": FORMAT_VERSION,
            "name": self.name,
            "seed": self.seed,
            "n_patients": self.n,
            "n_vehicles": self.n_vehicles,
            "capacity": self.capacity,
            "w_time": self.w_time,
            "unv": self.unv,
            "coords": self.coords.tolist(),
            "illness": self.illness[1:].tolist(),
            "service": self.service[1:].tolist(),
            "qualification": self.qualification.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Instance":
        if data.get("format") != "hhsrp-instance":
            raise ValueError("not an instance document")
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported instance format version {data.get('version')}")
        n = int(data["n_patients"])
        coords = np.array(data["coords"], dtype=float).reshape(n + 1, 2)
        illness = np.array([-1] + list(data["illness"]), dtype=int)
        service = np.array([0.0] + list(data["service"]), dtype=float)
        qual = np.array(data["qualification"], dtype=bool)
        return cls(coords, illness, service, qual, int(data["n_vehicles"]), int(data["capacity"]),
                   w_time=data["w_time"], unv=data["unv"], name=data.get("name", ""), seed=data.get("seed"))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Instance":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class Solution:
    """Routes, crews and service assignment.

    ``server`` maps every routed patient to its caregiver and ``drops`` holds
    the patients at which that caregiver is dropped.  Functions in this
    package never mutate a solution they receive; they work on ``copy()``.
    """

    n_patients: int
    routes: list[list[int]]
    crews: list[tuple[int, ...]]
    server: dict[int, int] = field(default_factory=dict)
    drops: set[int] = field(default_factory=set)

    @classmethod
    def empty(cls, inst: Instance, crews) -> "Solution":
        crews = [tuple(sorted(int(l) for l in c)) for c in crews]
        return cls(inst.n, [[0, inst.end] for _ in crews], crews)

    def copy(self) -> "Solution":
        return Solution(self.n_patients, [list(r) for r in self.routes], list(self.crews),
                        dict(self.server), set(self.drops))

    @property
    def end(self) -> int:
        return 2 * self.n_patients + 1

    @property
    def unvisited(self) -> list[int]:
        seen = self.visited()
        return [i for i in range(1, self.n_patients + 1) if i not in seen]

    def visited(self) -> set[int]:
        n = self.n_patients
        return {v for r in self.routes for v in r if 1 <= v <= n}

    def vehicle_of(self) -> dict[int, int]:
        n = self.n_patients
        return {v: k for k, r in enumerate(self.routes) for v in r if 1 <= v <= n}

    @property
    def assign(self) -> dict[int, tuple[int, int]]:
        veh = self.vehicle_of()
        return {i: (l, veh[i]) for i, l in self.server.items() if i in veh}

    @property
    def drop_events(self) -> list[tuple[int, int, int]]:
        veh = self.vehicle_of()
        return sorted((i, self.server[i], veh[i]) for i in self.drops if i in veh)

    def remove_patient(self, i: int) -> None:
        """Take patient ``i`` (and its pick-up node, if any) out of its route."""
        for r in self.routes:
            if i in r:
                r.remove(i)
                if i in self.drops:
                    r.remove(i + self.n_patients)
                break
        self.drops.discard(i)
        self.server.pop(i, None)

    def undrop(self, i: int) -> None:
        """Turn the drop at patient ``i`` back into a wait."""
        for r in self.routes:
            if i + self.n_patients in r:
                r.remove(i + self.n_patients)
                break
        self.drops.discard(i)

    def to_dict(self) -> dict:
        return {
            "format": "hhsrp-solution",
            "version": FORMAT_VERSION,
            "n_patients": self.n_patients,
            "routes": [list(map(int, r)) for r in self.routes],
            "crews": [list(map(int, c)) for c in self.crews],
            "assign": [[int(i), int(l), int(k)] for i, (l, k) in sorted(self.assign.items())],
            "drops": [list(map(int, e)) for e in self.drop_events],
            "unvisited": self.unvisited,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Solution":
        if data.get("format") != "hhsrp-solution":
            raise ValueError("not a solution document")
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported solution format version {data.get('version')}")
        sol = cls(int(data["n_patients"]), [list(r) for r in data["routes"]],
                  [tuple(c) for c in data["crews"]],
                  {int(i): int(l) for i, l, _ in data["assign"]},
                  {int(e[0]) for e in data["drops"]})
        if sorted(data["unvisited"]) != sol.unvisited:
            raise ValueError("unvisited list does not match the routes")
        return sol

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "Solution":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Timeline:
    """Simulated times.

    Vehicle times are keyed by ``(node, k)`` and caregiver times by
    ``(node, l)``; ``ah``/``dh`` are arrival and departure, ``hw`` the idle
    time of a caregiver and ``w`` the wait of a vehicle.
    """

    av: dict
    dv: dict
    w: dict
    ah: dict
    dh: dict
    hw: dict
    makespan: tuple[float, ...]


@dataclass(frozen=True)
class Objective:
    flow: float
    penalty: float

    @property
    def total(self) -> float:
        return self.flow + self.penalty


@dataclass(frozen=True)
class Violation:
    family: str
    key: tuple
    detail: str = ""


def route_makespan(route, server, drops, inst: Instance) -> float:
    """Return time of a single route, assuming it is structurally valid."""
    tt = inst.tt_list
    p = inst.p_list
    n = inst.n
    time = 0.0
    prev = 0
    pending = {}
    for node in route[1:]:
        time += tt[prev][node]
        if node <= n:
            if node in drops:
                pending[node] = time + p[node]
            else:
                time += p[node]
        elif node <= 2 * n:
            end = pending.pop(node - n)
            if end > time:
                time = end
        prev = node
    return time


def simulate_route(k: int, sol: Solution, inst: Instance, out: dict) -> float:
    """Forward simulation of vehicle ``k``; fills ``out`` and returns the makespan."""
    n = inst.n
    route = sol.routes[k]
    crew = sol.crews[k]
    tt = inst.tt_list
    p = inst.p_list
    av, dv, w, ah, dh, hw = (out[key] for key in ("av", "dv", "w", "ah", "dh", "hw"))
    if len(route) < 2 or route[0] != 0 or route[-1] != inst.end:
        raise StructureError(f"route {k} must start at 0 and end at {inst.end}")
    aboard = list(crew)
    pending = {}
    time = 0.0
    av[0, k] = dv[0, k] = 0.0
    w[0, k] = 0.0
    for l in crew:
        ah[0, l] = dh[0, l] = hw[0, l] = 0.0
    prev = 0
    for node in route[1:]:
        if node < 1 or node > inst.end or node == prev:
            raise StructureError(f"bad node {node} in route {k}")
        time += tt[prev][node]
        av[node, k] = time
        if node <= n:
            l = sol.server.get(node)
            if l is None or l not in aboard:
                raise CaregiverNotAboardError(f"caregiver {l} is not aboard vehicle {k} at patient {node}")
            if node in sol.drops:
                end = time + p[node]
                pending[node] = (l, end)
                aboard.remove(l)
                ah[node, l], dh[node, l], hw[node, l] = time, end, 0.0
                for o in aboard:
                    ah[node, o] = dh[node, o] = time
                    hw[node, o] = 0.0
                w[node, k] = 0.0
            else:
                end = time + p[node]
                for o in aboard:
                    ah[node, o], dh[node, o] = time, end
                    hw[node, o] = 0.0 if o == l else p[node]
                w[node, k] = p[node]
                time = end
        elif node <= 2 * n:
            i = node - n
            if i not in pending:
                raise DummyBeforePatientError(f"pick-up node {node} visited before patient {i} was dropped")
            l, end = pending.pop(i)
            depart = max(time, end)
            w[node, k] = depart - time
            for o in aboard:
                ah[node, o], dh[node, o], hw[node, o] = time, depart, depart - time
            ah[node, l], dh[node, l], hw[node, l] = end, depart, depart - end
            aboard.append(l)
            time = depart
        else:
            if pending:
                raise UnreturnedCaregiverError(
                    f"vehicle {k} returns without collecting caregiver(s) {[v[0] for v in pending.values()]}")
            for o in aboard:
                ah[node, o] = time
            w[node, k] = 0.0
        dv[node, k] = time
        prev = node
    if prev != inst.end:
        raise StructureError(f"route {k} does not end at {inst.end}")
    return time


def evaluate(sol: Solution, inst: Instance) -> Timeline:
    """Simulate every route with earliest-start semantics."""
    if sol.n_patients != inst.n or len(sol.routes) != len(sol.crews):
        raise StructureError("solution does not match the instance")
    out = {key: {} for key in ("av", "dv", "w", "ah", "dh", "hw")}
    seen = set()
    for r in sol.routes:
        for v in r[1:-1]:
            if v in seen:
                raise StructureError(f"node {v} visited twice")
            seen.add(v)
    for i in sol.drops:
        if i not in seen:
            raise StructureError(f"drop at unrouted patient {i}")
    for v in seen:
        if v > inst.n and v - inst.n not in sol.drops:
            raise StructureError(f"pick-up node {v} without a drop")
    spans = tuple(simulate_route(k, sol, inst, out) for k in range(len(sol.routes)))
    return Timeline(**out, makespan=spans)


def objective(sol: Solution, inst: Instance, timeline: Timeline | None = None) -> Objective:
    tl = timeline or evaluate(sol, inst)
    end = inst.end
    flow = sum(tl.ah[end, l] for crew in sol.crews for l in crew)
    return Objective(flow, inst.unv * len(sol.unvisited))


def total_cost(sol: Solution, inst: Instance) -> float:
    """Objective without building a full timeline (structure is assumed valid)."""
    flow = sum(len(c) * route_makespan(r, sol.server, sol.drops, inst) for r, c in zip(sol.routes, sol.crews))
    return flow + inst.unv * len(sol.unvisited)


def check_feasibility(sol: Solution, inst: Instance) -> list[Violation]:
    """Every violated constraint family; an empty list means feasible."""
    out = []
    n = inst.n
    members = {}
    for k, crew in enumerate(sol.crews):
        if len(crew) != inst.capacity:
            out.append(Violation("crew_size", (k,), f"{len(crew)} caregivers"))
        for l in crew:
            members.setdefault(l, []).append(k)
    for l in range(inst.n_caregivers):
        if len(members.get(l, [])) != 1:
            out.append(Violation("crew_partition", (l,), f"in vehicles {members.get(l, [])}"))
    if len(sol.routes) != inst.n_vehicles:
        out.append(Violation("fleet", (), f"{len(sol.routes)} routes for {inst.n_vehicles} vehicles"))
    count = {}
    for k, r in enumerate(sol.routes):
        if len(r) < 2 or r[0] != 0 or r[-1] != inst.end:
            out.append(Violation("flow", (k,), "route must start at 0 and end at 2n+1"))
        for v in r[1:-1]:
            count[v] = count.get(v, 0) + 1
            if not 1 <= v <= 2 * n:
                out.append(Violation("flow", (k, v), "unknown node"))
    for v, c in count.items():
        if c > 1:
            out.append(Violation("coverage", (v,), f"visited {c} times"))
    veh = sol.vehicle_of()
    for i in sorted(veh):
        l = sol.server.get(i)
        if l is None:
            out.append(Violation("assignment", (i,), "no caregiver"))
            continue
        if not inst.can_treat(l, i):
            out.append(Violation("qualification", (i, l)))
        if l not in sol.crews[veh[i]]:
            out.append(Violation("assignment", (i, l), f"caregiver not in crew of vehicle {veh[i]}"))
        dummy_k = next((k for k, r in enumerate(sol.routes) if i + n in r), None)
        if (i in sol.drops) != (dummy_k is not None):
            out.append(Violation("pickup", (i,), "drop and pick-up node must come together"))
        elif dummy_k is not None and dummy_k != veh[i]:
            out.append(Violation("pickup", (i,), "picked up by another vehicle"))
    for i in sol.drops:
        if i not in veh:
            out.append(Violation("pickup", (i,), "drop at unrouted patient"))
    try:
        tl = evaluate(sol, inst)
    except StructureError as exc:
        out.append(Violation("structure", (), str(exc)))
        return out
    for k, span in enumerate(tl.makespan):
        if span > inst.w_time + 1e-9:
            out.append(Violation("wtime_vehicle", (k,), f"{span:.4f} > {inst.w_time}"))
            for l in sol.crews[k]:
                out.append(Violation("wtime_caregiver", (l,), f"{span:.4f} > {inst.w_time}"))
    return out


def is_feasible(sol: Solution, inst: Instance) -> bool:
    return not check_feasibility(sol, inst)


def crew_partitions(caregivers, size: int):
    """All ways to split ``caregivers`` into unordered groups of ``size``."""
    caregivers = list(caregivers)
    if not caregivers:
        yield []
        return
    first, rest = caregivers[0], caregivers[1:]
    for others in combinations(rest, size - 1):
        group = (first,) + others
        remaining = [c for c in rest if c not in others]
        for tail in crew_partitions(remaining, size):
            yield [group] + tail

