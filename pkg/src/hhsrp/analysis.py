"""Comparison tables and cost indicators for benchmark runs."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from statistics import mean

log = logging.getLogger(__name__)

PI = 3.14  # value used for the patients-per-area indicator

ALGORITHMS = ("UBA", "UBA+DP", "ALNS-VS", "ALNS-M", "ALNS-STD")


def ber(f_vs: float, f_std: float, c: int) -> float:
    """Break-even ratio of vehicle cost to caregiver cost.

    Sharing vehicles pays off when the hourly vehicle cost exceeds this
    multiple of the hourly caregiver cost.  Returns ``nan`` (and logs a
    warning) when the denominator is not positive.
    """
    den = f_std - f_vs / c
    if den <= 0:
        log.warning("break-even denominator %.6g is not positive (f_vs=%s, f_std=%s, c=%s)", den, f_vs, f_std, c)
        return math.nan
    return (f_vs - f_std) / den


@dataclass(frozen=True)
class BreakEvenInput:
    f_vs: float
    f_std: float
    c: int

    @property
    def value(self) -> float:
        return ber(self.f_vs, self.f_std, self.c)


def pper_a(n_patients: int, radius: float) -> float:
    """Patients per unit area of the service disc."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    return n_patients / (PI * radius ** 2)


def rpd(f: float, f_min: float) -> float:
    """Relative percentage deviation from the best known value."""
    if f_min <= 0:
        raise ValueError("reference value must be positive")
    if f < f_min - 1e-9 * abs(f_min):
        raise ValueError(f"value {f} is below the reference {f_min}")
    return 100.0 * (f - f_min) / f_min


def improvement(base: float, new: float) -> float:
    """Percentage reduction of ``new`` relative to ``base``."""
    return 100.0 * (base - new) / base


@dataclass(frozen=True)
class RunRecord:
    instance: str
    algorithm: str
    seed: int
    objective: float
    n_drops: int = 0
    cpu_ms: float = 0.0
    n_unvisited: int = 0
    capacity: int = 2


def instance_class(name: str) -> str:
    """``h30_10_0_2`` -> ``h30_10_0``."""
    parts = name.split("_")
    return "_".join(parts[:3]) if len(parts) >= 4 else name


def best_by_instance(records) -> dict[str, dict[str, float]]:
    """Best objective per instance and algorithm."""
    out: dict[str, dict[str, float]] = {}
    for r in records:
        row = out.setdefault(r.instance, {})
        row[r.algorithm] = min(row.get(r.algorithm, math.inf), r.objective)
    return out


def mean_by_instance(records) -> dict[str, dict[str, float]]:
    acc: dict[tuple[str, str], list[float]] = {}
    for r in records:
        acc.setdefault((r.instance, r.algorithm), []).append(r.objective)
    out: dict[str, dict[str, float]] = {}
    for (inst, alg), vals in acc.items():
        out.setdefault(inst, {})[alg] = mean(vals)
    return out


COLUMNS = (
    ("UBA+DP-UBA%", "UBA", "UBA+DP"),
    ("VS-UBA+DP%", "UBA+DP", "ALNS-VS"),
    ("VS-UBA%", "UBA", "ALNS-VS"),
    ("VS-M%", "ALNS-M", "ALNS-VS"),
    ("STD-VS%", "ALNS-VS", "ALNS-STD"),
)


def compare(records, algorithms=None) -> list[dict]:
    """Per-instance comparison rows plus per-class means.

    Improvement columns are computed from the best objective of each
    algorithm on an instance; class rows average the instance rows.
    Every algorithm present must cover the same instances.
    """
    records = list(records)
    present = sorted({r.algorithm for r in records}, key=lambda a: (ALGORITHMS + (a,)).index(a))
    algorithms = list(algorithms or present)
    cover = {a: {r.instance for r in records if r.algorithm == a} for a in algorithms}
    every = set().union(*cover.values()) if cover else set()
    orphans = sorted((a, i) for a in algorithms for i in every - cover[a])
    if orphans:
        raise ValueError("instance sets differ; missing (algorithm, instance): "
                         + ", ".join(f"({a}, {i})" for a, i in orphans))
    best = best_by_instance(records)
    avg = mean_by_instance(records)
    cap = {r.instance: r.capacity for r in records}
    rows = []
    for inst in sorted(every, key=_natural):
        row = {"instance": inst, "class": instance_class(inst)}
        for a in algorithms:
            row[a] = best[inst][a]
            row[a + " avg"] = avg[inst][a]
        for name, base, new in COLUMNS:
            if base in algorithms and new in algorithms:
                row[name] = improvement(best[inst][base], best[inst][new])
        if "ALNS-VS" in algorithms and "ALNS-STD" in algorithms:
            row["BER"] = ber(best[inst]["ALNS-VS"], best[inst]["ALNS-STD"], cap[inst])
        rows.append(row)
    classes = []
    for cls in sorted({r["class"] for r in rows}, key=_natural):
        members = [r for r in rows if r["class"] == cls]
        agg = {"instance": cls, "class": cls}
        for key in members[0]:
            if key in ("instance", "class"):
                continue
            vals = [m[key] for m in members if not math.isnan(m[key])]
            agg[key] = mean(vals) if vals else math.nan
        classes.append(agg)
    return rows + classes


def _natural(name: str):
    return [int(p) if p.isdigit() else p for p in name.replace("h", "h_", 1).split("_")]


def to_csv(rows, digits: int = 4) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    for r in rows:
        keys += [k for k in r if k not in keys]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(keys)
    for r in rows:
        out = []
        for k in keys:
            v = r.get(k, "")
            if isinstance(v, float):
                v = "NA" if math.isnan(v) else f"{v:.{digits}f}"
            out.append(v)
        w.writerow(out)
    return buf.getvalue()


def read_runs(path) -> list[RunRecord]:
    """Read a run table written by the command-line ``solve`` command."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(RunRecord(row["instance"], row["algorithm"], int(row["seed"] or 0), float(row["objective"]),
                                 int(row.get("n_drops") or 0), float(row.get("cpu_ms") or 0.0),
                                 int(row.get("n_unvisited") or 0), int(row.get("capacity") or 2)))
    return out
