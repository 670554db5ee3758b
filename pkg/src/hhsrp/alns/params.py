from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

VARIANTS = ("VS", "M", "STD")
VISIBILITIES = ("unique", "common", "none")


@dataclass(frozen=True)
class AlnsParams:
    """Search settings.  Defaults are the tuned values used for the benchmark."""

    theta: int = 25000          # minimum number of iterations
    theta_extra: int = 2500     # iterations without improvement before stopping
    omega: int = 250            # restart from the best after this many stagnant iterations
    phi: int = 100              # caregiver swap period
    min_remove: float = 0.1     # final share of patients removed per iteration
    max_remove: float = 0.5     # initial share of patients removed per iteration
    shaw_alpha: float = 0.3     # relatedness weight on travel time
    shaw_beta: float = 0.1      # relatedness weight on service time
    dummy_min: float = 0.5      # bounds on the share of pick-up nodes removed
    dummy_max: float = 0.8
    noise: float = 0.1
    cooling: float = 0.99975
    evaporation: float = 0.95
    t0_factor: float = 0.05
    t0: float | None = None     # explicit start temperature overrides t0_factor
    visibility: str = "unique"
    variant: str = "VS"
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.visibility not in VISIBILITIES:
            raise ValueError(f"visibility must be one of {VISIBILITIES}")
        if not 0 < self.min_remove <= self.max_remove <= 1:
            raise ValueError("need 0 < min_remove <= max_remove <= 1")
        if not 0 <= self.dummy_min <= self.dummy_max <= 1:
            raise ValueError("need 0 <= dummy_min <= dummy_max <= 1")
        if not 0 < self.cooling < 1:
            raise ValueError("cooling must lie in (0, 1)")
        if not 0 <= self.evaporation <= 1:
            raise ValueError("evaporation must lie in [0, 1]")
        if min(self.theta, self.theta_extra, self.omega, self.phi) < 1:
            raise ValueError("iteration counts must be positive")

    @property
    def uses_drops(self) -> bool:
        return self.variant == "VS"

    @property
    def uses_swap(self) -> bool:
        return self.variant != "STD" and self.visibility != "none"

    def with_(self, **kw) -> "AlnsParams":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "AlnsParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "AlnsParams":
        return cls.from_dict(json.loads(Path(path).read_text()))
