"""Random instance generator for the benchmark grid.

An instance class is fixed by the number of patients, the radius of the
service disc around the care centre and the illness-difficulty level.
Replicates of a class share demands, service times and qualifications and
differ only in the patient coordinates.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass

import numpy as np

from .core import Instance

log = logging.getLogger(__name__)

PATIENT_LEVELS = (10, 30, 50, 100)
RADIUS_LEVELS = (10, 20, 30, 40)
DIFFICULTY_LEVELS = (0, 1, 2)
CAREGIVERS_FOR = {10: 4, 30: 4, 50: 6, 100: 12}

# share of basic / moderate / difficult illnesses per difficulty level
ILLNESS_MIX = {0: (0.80, 0.15, 0.05), 1: (0.60, 0.30, 0.10), 2: (0.50, 0.30, 0.20)}
# mean and standard deviation of service minutes per illness type
SERVICE_TIME = ((10.0, 2.5), (20.0, 5.0), (30.0, 7.5))
MIN_SERVICE = 1.0

_MASK64 = (1 << 64) - 1
_NAME = re.compile(r"^h(\d+)_(\d+)_(\d+)(?:_(\d+))?$")


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step; returns (next_state, output)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


def expand_seed(master: int, count: int) -> list[int]:
    """Deterministic stream of ``count`` 64-bit seeds from one master seed."""
    state = master & _MASK64
    out = []
    for _ in range(count):
        state, z = splitmix64(state)
        out.append(z)
    return out


@dataclass(frozen=True)
class InstanceClassSpec:
    n_patients: int
    radius: float
    dd_level: int
    replicate: int = 0
    seed: int = 0
    n_caregivers: int | None = None
    capacity: int = 2
    w_time: float = 600.0
    unv: float | None = None

    def __post_init__(self):
        if self.dd_level not in ILLNESS_MIX:
            raise ValueError(f"difficulty level must be one of {sorted(ILLNESS_MIX)}")
        if self.n_patients < 1 or self.radius <= 0:
            raise ValueError("need a positive patient count and radius")
        if self.caregivers % self.capacity:
            raise ValueError("caregiver count must be a multiple of the vehicle capacity")

    @property
    def caregivers(self) -> int:
        if self.n_caregivers is not None:
            return self.n_caregivers
        if self.n_patients not in CAREGIVERS_FOR:
            raise ValueError(f"no default caregiver count for {self.n_patients} patients")
        return CAREGIVERS_FOR[self.n_patients]

    @property
    def class_name(self) -> str:
        return f"h{self.n_patients}_{_fmt(self.radius)}_{self.dd_level}"

    @property
    def name(self) -> str:
        return f"{self.class_name}_{self.replicate}"


def _fmt(x) -> str:
    return str(int(x)) if float(x).is_integer() else str(x)


def class_name(spec: InstanceClassSpec) -> str:
    return spec.name


def parse_name(name: str) -> tuple[int, int, int, int | None]:
    """``h30_10_0_2`` -> (30, 10, 0, 2); the replicate is optional."""
    m = _NAME.match(name)
    if not m:
        raise ValueError(f"not an instance name: {name!r}")
    rep = m.group(4)
    return int(m.group(1)), int(m.group(2)), int(m.group(3)), None if rep is None else int(rep)


def _sample_disc(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    r = radius * np.sqrt(rng.random(count))
    phi = 2.0 * np.pi * rng.random(count)
    return np.column_stack([r * np.cos(phi), r * np.sin(phi)])


def _qualifications(rng: np.random.Generator, n_caregivers: int, demanded) -> np.ndarray:
    n_ill = len(SERVICE_TIME)
    qual = np.zeros((n_caregivers, n_ill), dtype=bool)
    for l in range(n_caregivers):
        k = int(rng.integers(1, 3))
        qual[l, rng.choice(n_ill, size=k, replace=False)] = True
    need = min(2, n_caregivers)
    for s in sorted(demanded):
        while qual[:, s].sum() < need:
            # add the skill to a caregiver holding the fewest skills
            free = np.flatnonzero(~qual[:, s])
            load = qual[free].sum(axis=1)
            pick = free[load == load.min()]
            qual[rng.choice(pick), s] = True
    return qual


def generate(spec: InstanceClassSpec) -> Instance:
    """Deterministic instance for ``spec`` (same spec gives identical arrays)."""
    key = [spec.seed & _MASK64, spec.n_patients, int(round(spec.radius * 1000)), spec.dd_level, spec.caregivers]
    class_rng = np.random.default_rng(np.random.SeedSequence(key))
    coord_rng = np.random.default_rng(np.random.SeedSequence(key + [spec.replicate + 1]))
    n = spec.n_patients
    illness = class_rng.choice(3, size=n, p=ILLNESS_MIX[spec.dd_level])
    mean = np.array([SERVICE_TIME[s][0] for s in illness])
    sd = np.array([SERVICE_TIME[s][1] for s in illness])
    service = class_rng.normal(mean, sd)
    low = service < MIN_SERVICE
    if low.any():
        log.info("%s: %d service time(s) truncated at %.1f", spec.name, int(low.sum()), MIN_SERVICE)
    service = np.maximum(service, MIN_SERVICE)
    qual = _qualifications(class_rng, spec.caregivers, set(illness.tolist()))
    coords = np.vstack([[0.0, 0.0], _sample_disc(coord_rng, n, spec.radius)])
    return Instance(coords, np.concatenate([[-1], illness]), np.concatenate([[0.0], service]), qual,
                    n_vehicles=spec.caregivers // spec.capacity, capacity=spec.capacity,
                    w_time=spec.w_time, unv=spec.unv, name=spec.name, seed=spec.seed)


def grid_specs(seed: int = 0, replicates: int = 5, patients=PATIENT_LEVELS) -> list[InstanceClassSpec]:
    """The full factorial grid in a fixed order."""
    return [InstanceClassSpec(n, r, d, rep, seed)
            for n in patients for r in RADIUS_LEVELS for d in DIFFICULTY_LEVELS for rep in range(replicates)]


def class_specs(name: str, seed: int = 0, replicates: int = 5) -> list[InstanceClassSpec]:
    n, r, d, rep = parse_name(name)
    reps = [rep] if rep is not None else range(replicates)
    return [InstanceClassSpec(n, r, d, k, seed) for k in reps]
