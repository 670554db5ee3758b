"""Mixed-integer model of the routing problem, written in LP text format.

The model is assembled once as sparse rows.  The same rows serve two
purposes: ``emit_lp`` writes them for an external solver, and
``check_residuals`` substitutes a simulated solution into every row to prove
that the evaluator and the model agree.

Row names carry the constraint family followed by the indices, e.g.
``vehicle_arrival_3_4_0`` for the arc 3 -> 4 of vehicle 0.

Notes on the formulation:

* Arc variables exist for every ordered node pair; arcs that cannot be used
  (self loops, arcs into the start depot, arcs out of the end depot) are
  fixed to zero in the bounds section.
* The arc from the start depot straight to the end depot is a legal idle
  tour, so a vehicle may stay home.
* The treatment row reads ``sum(alpha * q) + u_i * d_is = d_is``; a patient is
  either served by exactly one qualified caregiver or left unvisited.
* Time variables of nodes a vehicle (or caregiver) never visits are filled
  with a completion value that keeps the big-M rows inactive.  This is valid
  when three times the service radius fits in the working time.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .core import Instance, Solution, Timeline, evaluate, objective


@dataclass(frozen=True)
class MilpVariant:
    kind: str = "VS"
    mu: float | None = None

    def __post_init__(self):
        if self.kind not in ("VS", "M", "STD"):
            raise ValueError(f"unknown model variant {self.kind!r}")


@dataclass
class LinearModel:
    names: list[str] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)
    binary: list[bool] = field(default_factory=list)
    upper: list[float] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)
    senses: list[str] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    rows: list[int] = field(default_factory=list)
    cols: list[int] = field(default_factory=list)
    vals: list[float] = field(default_factory=list)
    obj: dict[int, float] = field(default_factory=dict)
    _matrix: sparse.csr_matrix | None = None

    def var(self, name: str, binary: bool = False) -> int:
        j = self.index.get(name)
        if j is None:
            j = len(self.names)
            self.names.append(name)
            self.index[name] = j
            self.binary.append(binary)
            self.upper.append(1.0 if binary else np.inf)
        return j

    def fix_zero(self, name: str) -> None:
        self.upper[self.index[name]] = 0.0

    def add(self, name: str, terms, sense: str, rhs: float) -> None:
        r = len(self.row_names)
        merged = {}
        for col, coef in terms:
            merged[col] = merged.get(col, 0.0) + coef
        for col, coef in merged.items():
            if coef != 0.0:
                self.rows.append(r)
                self.cols.append(col)
                self.vals.append(coef)
        self.row_names.append(name)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self._matrix = None

    def matrix(self) -> sparse.csr_matrix:
        if self._matrix is None:
            self._matrix = sparse.csr_matrix((self.vals, (self.rows, self.cols)),
                                             shape=(len(self.row_names), len(self.names)))
        return self._matrix

    def family_counts(self) -> dict[str, int]:
        out = {}
        for name in self.row_names:
            fam = name.rsplit("_", _index_count(name))[0]
            out[fam] = out.get(fam, 0) + 1
        return out


def _index_count(name: str) -> int:
    parts = name.split("_")
    k = 0
    for p in reversed(parts):
        if p.isdigit():
            k += 1
        else:
            break
    return k


def _fmt(x: float) -> str:
    return repr(float(x)) if not float(x).is_integer() else str(int(x))


def model_instance(inst: Instance, variant: MilpVariant) -> Instance:
    return inst.single_caregiver() if variant.kind == "STD" else inst


def node_sets(inst: Instance, variant: MilpVariant):
    n = inst.n
    v1 = list(range(1, n + 1))
    v2 = list(range(n + 1, 2 * n + 1)) if variant.kind == "VS" else []
    return [0] + v1 + v2 + [2 * n + 1], v1, v2


def build_model(inst: Instance, variant: MilpVariant | None = None) -> LinearModel:
    """All rows of the model for ``inst`` (transformed to single caregivers for STD)."""
    variant = variant or MilpVariant()
    inst = model_instance(inst, variant)
    n = inst.n
    end = 2 * n + 1
    V, V1, V2 = node_sets(inst, variant)
    K = range(inst.n_vehicles)
    L = range(inst.n_caregivers)
    S = range(inst.n_illnesses)
    q = inst.qualification.astype(int)
    d = inst.demand
    p = inst.service
    t = inst.tt
    M1 = inst.w_time
    M2 = float(p[1:].sum())
    drops = variant.kind == "VS"
    m = LinearModel()

    x = {(i, j, k): m.var(f"x_{i}_{j}_{k}", True) for i in V for j in V for k in K}
    z = {(i, j, k, l): m.var(f"z_{i}_{j}_{k}_{l}", True) for i in V for j in V for k in K for l in L}
    y = {(i, k, l): m.var(f"y_{i}_{k}_{l}", True) for i in V1 for k in K for l in L} if drops else {}
    a = {(i, k, l, s): m.var(f"alpha_{i}_{k}_{l}_{s}", True) for i in V1 for k in K for l in L for s in S}
    u = {i: m.var(f"u_{i}", True) for i in V1}
    psi = {(i, k, l): m.var(f"psi_{i}_{k}_{l}", True) for i in V1 for k in K for l in L}
    gam = {(i, k, l): m.var(f"gamma_{i}_{k}_{l}", True) for i in V1 for k in K for l in L}
    av = {(i, k): m.var(f"av_{i}_{k}") for i in V for k in K}
    dv = {(i, k): m.var(f"dv_{i}_{k}") for i in V for k in K}
    w = {(i, k): m.var(f"w_{i}_{k}") for i in V for k in K}
    ah = {(i, l): m.var(f"ah_{i}_{l}") for i in V for l in L}
    dh = {(i, l): m.var(f"dh_{i}_{l}") for i in V for l in L}
    hw = {(i, l): m.var(f"hw_{i}_{l}") for i in V for l in L}

    for (i, j, k), col in x.items():
        if i == j or j == 0 or i == end:
            m.fix_zero(m.names[col])
    for (i, j, k, l), col in z.items():
        if i == j or j == 0 or i == end:
            m.fix_zero(m.names[col])
    for (i, k, l, s), col in a.items():
        if q[l, s] == 0 or d[i, s] == 0:
            m.fix_zero(m.names[col])

    for l in L:
        m.obj[ah[end, l]] = 1.0
    for i in V1:
        m.obj[u[i]] = inst.unv

    first = V1 + [end]
    for j in V1:
        m.add(f"visit_{j}", [(x[i, j, k], 1) for i in V for k in K] + [(u[j], 1)], "=", 1)
    for k in K:
        m.add(f"leave_depot_{k}", [(x[0, j, k], 1) for j in first], "=", 1)
    for l in L:
        m.add(f"board_{l}", [(z[0, j, k, l], 1) for j in first for k in K], "=", 1)
    for i in V1 + V2:
        for k in K:
            m.add(f"vehicle_flow_{i}_{k}", [(x[i, j, k], 1) for j in V] + [(x[j, i, k], -1) for j in V], "=", 0)
    for i in V:
        for j in V:
            for k in K:
                for l in L:
                    m.add(f"ride_{i}_{j}_{k}_{l}", [(z[i, j, k, l], 1), (x[i, j, k], -1)], "<=", 0)
    for i in V1:
        for s in S:
            m.add(f"treat_{i}_{s}", [(a[i, k, l, s], q[l, s]) for k in K for l in L] + [(u[i], d[i, s])],
                  "=", d[i, s])
    for j in V1:
        for k in K:
            for l in L:
                m.add(f"reach_{j}_{k}_{l}", [(z[i, j, k, l], 1) for i in V] + [(a[j, k, l, s], -1) for s in S],
                      ">=", 0)
    if drops:
        for j in V1:
            for k in K:
                for l in L:
                    m.add(f"drop_visit_{j}_{k}_{l}", [(y[j, k, l], 1)] + [(x[i, j, k], -1) for i in V], "<=", 0)
                    m.add(f"pickup_visit_{j}_{k}_{l}", [(x[i, j + n, k], 1) for i in V] + [(y[j, k, l], -1)],
                          ">=", 0)
                m.add(f"pickup_only_{j}_{k}", [(x[i, j + n, k], 1) for i in V] + [(y[j, k, l], -1) for l in L],
                      "<=", 0)
    for i in V1:
        for l in L:
            terms = [(z[i, j, k, l], 1) for j in V for k in K]
            if drops:
                terms += [(y[i, k, l], 1) for k in K]
            m.add(f"stay_{i}_{l}", terms, "<=", 1)
    for i in V1:
        for k in K:
            for l in L:
                terms = [(z[j, i, k, l], 1) for j in V] + [(z[i, j, k, l], -1) for j in V]
                if drops:
                    terms.append((y[i, k, l], -1))
                m.add(f"crew_flow_{i}_{k}_{l}", terms, "=", 0)
    for i in V2:
        for k in K:
            for l in L:
                m.add(f"crew_flow_{i}_{k}_{l}",
                      [(z[j, i, k, l], 1) for j in V] + [(y[i - n, k, l], 1)] + [(z[i, j, k, l], -1) for j in V],
                      "=", 0)
    for i in V:
        for j in V:
            for k in K:
                m.add(f"vehicle_arrival_{i}_{j}_{k}", [(av[j, k], 1), (dv[i, k], -1), (x[i, j, k], -M1)],
                      ">=", t[i, j] - M1)
    for i in V:
        for j in V:
            for k in K:
                for l in L:
                    m.add(f"crew_arrival_{i}_{j}_{k}_{l}", [(ah[j, l], 1), (dh[i, l], -1), (z[i, j, k, l], -M1)],
                          ">=", t[i, j] - M1)
    for i in V1:
        for k in K:
            terms = [(w[i, k], 1)] + [(gam[i, k, l], -p[i]) for l in L]
            if drops:
                terms += [(x[j, i + n, k], M2) for j in V]
            m.add(f"wait_patient_{i}_{k}", terms, ">=", 0)
    for i in V2:
        for k in K:
            terms = [(w[i, k], 1), (av[i - n, k], -1), (av[i, k], 1)]
            terms += [(a[i - n, k, l, s], -p[i - n]) for l in L for s in S]
            terms += [(x[j, i, k], -M1) for j in V]
            m.add(f"wait_pickup_{i}_{k}", terms, ">=", -M1)
    for i in V1:
        for l in L:
            terms = [(hw[i, l], 1)] + [(gam[i, k, o], -p[i]) for k in K for o in L if o != l]
            terms += [(psi[i, k, l], -M2) for k in K]
            m.add(f"idle_patient_{i}_{l}", terms, ">=", -M2)
    for i in V2:
        for k in K:
            for l in L:
                terms = [(hw[i, l], 1), (av[i, k], -1), (av[i - n, k], 1), (y[i - n, k, l], -M1)]
                terms += [(a[i - n, k, o, s], p[i - n]) for o in L for s in S]
                m.add(f"idle_pickup_{i}_{k}_{l}", terms, ">=", -M1)
    for i in V:
        for k in K:
            m.add(f"vehicle_depart_{i}_{k}", [(dv[i, k], 1), (av[i, k], -1), (w[i, k], -1)], ">=", 0)
    for i in V:
        for l in L:
            m.add(f"crew_depart_{i}_{l}", [(dh[i, l], 1), (ah[i, l], -1), (hw[i, l], -1)], ">=", 0)
    for i in V:
        for k in K:
            for l in L:
                into = [(z[j, i, k, l], M1) for j in V]
                out = [(z[i, j, k, l], M1) for j in V]
                m.add(f"sync_arrive_lo_{i}_{k}_{l}", [(av[i, k], 1), (ah[i, l], -1)] + [(c, -v) for c, v in into],
                      ">=", -M1)
                m.add(f"sync_arrive_hi_{i}_{k}_{l}", [(av[i, k], 1), (ah[i, l], -1)] + into, "<=", M1)
                m.add(f"sync_depart_lo_{i}_{k}_{l}", [(dv[i, k], 1), (dh[i, l], -1)] + [(c, -v) for c, v in out],
                      ">=", -M1)
                m.add(f"sync_depart_hi_{i}_{k}_{l}", [(dv[i, k], 1), (dh[i, l], -1)] + out, "<=", M1)
    for i in V1:
        for k in K:
            for l in L:
                terms = [(psi[i, k, l], 1)] + [(z[j, i, k, l], -1) for j in V]
                if drops:
                    terms.append((y[i, k, l], 1))
                m.add(f"ride_and_wait_{i}_{k}_{l}", terms, "=", 0)
                terms = [(gam[i, k, l], 1)] + [(a[i, k, l, s], -1) for s in S]
                if drops:
                    terms.append((y[i, k, l], 1))
                m.add(f"serve_and_wait_{i}_{k}_{l}", terms, "=", 0)
    for k in K:
        m.add(f"capacity_{k}", [(z[0, j, k, l], 1) for j in first for l in L], "=", inst.capacity)
    for l in L:
        m.add(f"caregiver_shift_{l}", [(ah[end, l], 1)], "<=", inst.w_time)
    for k in K:
        m.add(f"vehicle_shift_{k}", [(av[end, k], 1)], "<=", inst.w_time)
    if variant.mu is not None:
        m.add("bound_vehicle_flow", [(av[end, k], 1) for k in K] + [(u[i], inst.unv) for i in V1], "<=", variant.mu)
        m.add("bound_caregiver_flow", [(ah[end, l], 1) for l in L] + [(u[i], inst.unv) for i in V1],
              "<=", variant.mu)
    return m


def _expr(terms, m: LinearModel) -> list[str]:
    out = []
    for col, coef in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = m.names[col] if mag == 1 else f"{_fmt(mag)} {m.names[col]}"
        out.append(f"{sign} {body}")
    if out and out[0].startswith("+ "):
        out[0] = out[0][2:]
    return out


def _wrap(head: str, parts: list[str], tail: str = "", width: int = 200) -> list[str]:
    lines, cur = [], head
    for p in parts:
        if len(cur) + len(p) + 1 > width:
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}"
    lines.append(cur + tail)
    return lines


def to_lp(m: LinearModel, title: str = "") -> str:
    A = m.matrix().tocsr()
    lines = [f"\\ {title}".rstrip(), "Minimize"]
    obj = sorted(m.obj.items())
    lines += _wrap(" obj:", _expr(obj, m))
    lines.append("Subject To")
    sense = {"<=": "<=", ">=": ">=", "=": "="}
    for r, name in enumerate(m.row_names):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        terms = list(zip(A.indices[lo:hi].tolist(), A.data[lo:hi].tolist()))
        parts = _expr(terms, m) or ["0 " + m.names[0]]
        lines += _wrap(f" {name}:", parts, f" {sense[m.senses[r]]} {_fmt(m.rhs[r])}")
    lines.append("Bounds")
    for j, name in enumerate(m.names):
        if m.upper[j] == 0.0:
            lines.append(f" {name} = 0")
    lines.append("Binaries")
    for j, name in enumerate(m.names):
        if m.binary[j] and m.upper[j] != 0.0:
            lines.append(f" {name}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def emit_lp(inst: Instance, variant: MilpVariant | None = None) -> str:
    """LP text of the full model (deterministic, ordering-stable)."""
    variant = variant or MilpVariant()
    title = f"{inst.name or 'instance'} variant={variant.kind}" + (f" mu={_fmt(variant.mu)}" if variant.mu is not None else "")
    return to_lp(build_model(inst, variant), title)


def _completion(visited: dict, nodes, t, w_time: float) -> dict:
    """Times for nodes outside a visited set, chosen so big-M rows stay slack."""
    out = {}
    for v in nodes:
        if v in visited:
            continue
        reach = max((dep + t[i, v] for i, dep in visited.items()), default=0.0)
        out[v] = max(0.0, reach - w_time)
    return out


def solution_vector(sol: Solution, tl: Timeline, inst: Instance, variant: MilpVariant,
                    m: LinearModel | None = None) -> tuple[LinearModel, np.ndarray]:
    """Variable values of ``sol`` in the model's column order."""
    inst = model_instance(inst, variant)
    m = m or build_model(inst, variant)
    n = inst.n
    end = 2 * n + 1
    V, V1, V2 = node_sets(inst, variant)
    t = inst.tt
    val = np.zeros(len(m.names))

    def put(name, v):
        val[m.index[name]] = v

    for k, (route, crew) in enumerate(zip(sol.routes, sol.crews)):
        aboard = set(crew)
        for a, b in zip(route[:-1], route[1:]):
            put(f"x_{a}_{b}_{k}", 1)
            if 1 <= a <= n and a in sol.drops:
                aboard.discard(sol.server[a])
            elif n < a <= 2 * n:
                aboard.add(sol.server[a - n])
            for l in aboard:
                put(f"z_{a}_{b}_{k}_{l}", 1)
        for i in route:
            if 1 <= i <= n:
                l = sol.server[i]
                put(f"alpha_{i}_{k}_{l}_{int(inst.illness[i])}", 1)
                if i in sol.drops:
                    put(f"y_{i}_{k}_{l}", 1)
    for i in sol.unvisited:
        put(f"u_{i}", 1)
    for i in V1:
        for k in range(inst.n_vehicles):
            for l in range(inst.n_caregivers):
                into = sum(val[m.index[f"z_{j}_{i}_{k}_{l}"]] for j in V)
                yv = val[m.index[f"y_{i}_{k}_{l}"]] if variant.kind == "VS" else 0.0
                put(f"psi_{i}_{k}_{l}", into - yv)
                put(f"gamma_{i}_{k}_{l}", sum(val[m.index[f"alpha_{i}_{k}_{l}_{s}"]]
                                             for s in range(inst.n_illnesses)) - yv)
    for k in range(inst.n_vehicles):
        seen = {v: tl.dv[v, k] for v in V if (v, k) in tl.dv}
        for v in seen:
            put(f"av_{v}_{k}", tl.av[v, k])
            put(f"dv_{v}_{k}", tl.dv[v, k])
            put(f"w_{v}_{k}", tl.w[v, k])
        for v, time in _completion(seen, V, t, inst.w_time).items():
            put(f"av_{v}_{k}", time)
            put(f"dv_{v}_{k}", time)
    for l in range(inst.n_caregivers):
        seen = {v: tl.dh[v, l] for v in V if (v, l) in tl.dh}
        for v in V:
            if (v, l) in tl.ah:
                put(f"ah_{v}_{l}", tl.ah[v, l])
                put(f"dh_{v}_{l}", tl.dh.get((v, l), tl.ah[v, l]))
                put(f"hw_{v}_{l}", tl.hw.get((v, l), 0.0))
        for v, time in _completion(seen, V, t, inst.w_time).items():
            if (v, l) not in tl.ah:
                put(f"ah_{v}_{l}", time)
                put(f"dh_{v}_{l}", time)
    return m, val


@dataclass(frozen=True)
class ResidualReport:
    max_violation: float
    worst_row: str
    objective_gap: float
    violated_rows: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return self.max_violation <= 1e-6 and self.objective_gap <= 1e-6


def row_violations(m: LinearModel, val: np.ndarray) -> np.ndarray:
    lhs = m.matrix() @ val
    rhs = np.array(m.rhs)
    sense = np.array(m.senses)
    viol = np.zeros(len(rhs))
    le = sense == "<="
    ge = sense == ">="
    eq = sense == "="
    viol[le] = np.maximum(0.0, lhs[le] - rhs[le])
    viol[ge] = np.maximum(0.0, rhs[ge] - lhs[ge])
    viol[eq] = np.abs(lhs[eq] - rhs[eq])
    return viol


def check_residuals(sol: Solution, tl: Timeline | None, inst: Instance, variant: MilpVariant | None = None,
                    model: LinearModel | None = None, tol: float = 1e-6) -> ResidualReport:
    """Largest row violation of ``sol`` and the gap between model and evaluator objectives.

    For STD, ``sol`` must refer to ``inst.single_caregiver()``.
    """
    variant = variant or MilpVariant()
    work = model_instance(inst, variant)
    tl = tl or evaluate(sol, work)
    m, val = solution_vector(sol, tl, inst, variant, model)
    viol = row_violations(m, val)
    upper = np.array(m.upper)
    bound = np.maximum(0.0, val - upper)
    bound = np.maximum(bound, np.maximum(0.0, -val))
    worst = int(np.argmax(viol)) if len(viol) else 0
    worst_v = float(viol[worst]) if len(viol) else 0.0
    if bound.max(initial=0.0) > worst_v:
        worst_v = float(bound.max())
        worst_name = "bound_" + m.names[int(np.argmax(bound))]
    else:
        worst_name = m.row_names[worst] if len(viol) else ""
    lp_obj = sum(coef * val[col] for col, coef in m.obj.items())
    gap = abs(lp_obj - objective(sol, work, tl).total)
    bad = tuple(m.row_names[r] for r in np.flatnonzero(viol > tol))
    return ResidualReport(worst_v, worst_name, gap, bad)
