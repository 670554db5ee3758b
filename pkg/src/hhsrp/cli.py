"""Command-line driver: ``hhsrp gen|solve|oracle|emit-lp|report``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from statistics import mean

from . import analysis
from .alns import AlnsParams, run
from .core import Instance, check_feasibility, objective
from .instancegen import class_specs, expand_seed, generate, grid_specs
from .milp import MilpVariant, emit_lp
from .oracle import exact_solve
from .uba import UbaReport, apply_dp_postpass, uba_solve

log = logging.getLogger("hhsrp")

RUN_FIELDS = ["instance", "algorithm", "variant", "seed", "objective", "avg_objective", "n_drops", "cpu_ms",
              "n_unvisited", "iterations", "capacity", "note"]


def _instances(paths) -> list[Path]:
    out = []
    for p in paths:
        p = Path(p)
        out += sorted(p.glob("*.json")) if p.is_dir() else [p]
    return out


def cmd_gen(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.grid:
        specs = grid_specs(args.seed, args.replicates)
    elif args.instance_class:
        specs = [s for name in args.instance_class for s in class_specs(name, args.seed, args.replicates)]
    else:
        print("gen: give --grid or --class", file=sys.stderr)
        return 1
    for spec in specs:
        generate(spec).save(out / f"{spec.name}.json")
    print(f"wrote {len(specs)} instance(s) to {out}")
    return 0


def _solve_one(task):
    path, algo, params, replications, out_dir = task
    inst = Instance.load(path)
    rows = []
    name = inst.name or Path(path).stem
    try:
        if algo in ("uba", "uba+dp"):
            start = time.process_time()
            rep = UbaReport()
            sol, _ = uba_solve(inst, report=rep)
            label = "UBA"
            if algo == "uba+dp":
                sol = apply_dp_postpass(sol, inst)
                label = "UBA+DP"
            cpu = 1000.0 * (time.process_time() - start)
            bad = check_feasibility(sol, inst)
            if bad:
                raise RuntimeError(f"infeasible result: {bad[0]}")
            note = f"tour fallback on vehicles {rep.tsp_fallback}" if rep.tsp_fallback else ""
            obj = objective(sol, inst).total
            rows.append(dict(instance=name, algorithm=label, variant="", seed="", objective=obj, avg_objective=obj,
                             n_drops=len(sol.drops), cpu_ms=cpu, n_unvisited=len(sol.unvisited), iterations="",
                             capacity=inst.capacity, note=note))
            if out_dir:
                sol.save(Path(out_dir) / f"{name}.{label}.sol.json")
        else:
            seeds = expand_seed(params.seed, replications)
            reports = []
            for s in seeds:
                r = run(inst, params.with_(seed=s))
                bad = check_feasibility(r.best, r.instance)
                if bad:
                    raise RuntimeError(f"infeasible result: {bad[0]}")
                reports.append(r)
            avg = mean(r.objective for r in reports)
            for r in reports:
                rows.append(dict(instance=name, algorithm=f"ALNS-{params.variant}", variant=params.variant,
                                 seed=r.seed, objective=r.objective, avg_objective=avg, n_drops=r.n_drops,
                                 cpu_ms=r.cpu_ms, n_unvisited=r.n_unvisited, iterations=r.iterations,
                                 capacity=inst.capacity, note=""))
            if out_dir:
                best = min(reports, key=lambda r: r.objective)
                best.best.save(Path(out_dir) / f"{name}.ALNS-{params.variant}.sol.json")
        return rows, None
    except Exception as exc:  # reported per instance, the batch goes on
        return rows, f"{name}: {exc}"


def _write_rows(rows, path) -> None:
    fh = open(path, "w", newline="") if path else sys.stdout
    w = csv.DictWriter(fh, fieldnames=RUN_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.4f}" if isinstance(v, float) else v) for k, v in r.items()})
    if path:
        fh.close()


def _params(args) -> AlnsParams:
    params = AlnsParams.from_file(args.params) if args.params else AlnsParams()
    over = {k: v for k, v in dict(variant=args.variant, visibility=args.visibility, seed=args.seed,
                                  theta=args.theta, theta_extra=args.theta_extra).items() if v is not None}
    return params.with_(**over)


def cmd_solve(args) -> int:
    params = _params(args)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
    tasks = [(str(p), args.algo, params, args.replications, args.out) for p in _instances(args.instances)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_solve_one, tasks))
    else:
        results = [_solve_one(t) for t in tasks]
    rows = [r for res, _ in results for r in res]
    errors = [e for _, e in results if e]
    _write_rows(rows, Path(args.out) / "runs.csv" if args.out else None)
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return 2 if errors else 0


def cmd_oracle(args) -> int:
    rows, errors = [], []
    for path in _instances(args.instances):
        inst = Instance.load(path)
        name = inst.name or path.stem
        try:
            start = time.process_time()
            sol, obj = exact_solve(inst, args.variant)
            cpu = 1000.0 * (time.process_time() - start)
            rows.append(dict(instance=name, algorithm=f"EXACT-{args.variant}", variant=args.variant, seed="",
                             objective=obj.total, avg_objective=obj.total, n_drops=len(sol.drops), cpu_ms=cpu,
                             n_unvisited=len(sol.unvisited), iterations="", capacity=inst.capacity, note=""))
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                sol.save(Path(args.out) / f"{name}.EXACT-{args.variant}.sol.json")
        except Exception as exc:
            errors.append(f"{name}: {exc}")
    _write_rows(rows, Path(args.out) / "runs.csv" if args.out else None)
    for e in errors:
        print(f"error: {e}", file=sys.stderr)
    return 2 if errors else 0


def cmd_emit_lp(args) -> int:
    inst = Instance.load(args.instance)
    text = emit_lp(inst, MilpVariant(args.variant, args.mu))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_report(args) -> int:
    records = [r for p in args.runs for r in analysis.read_runs(p)]
    try:
        rows = analysis.compare(records)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    text = analysis.to_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hhsrp", description="Home health care routing with shared vehicles.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate benchmark instances")
    g.add_argument("--grid", action="store_true", help="the full factorial grid")
    g.add_argument("--class", dest="instance_class", action="append", help="a class such as h30_10_0")
    g.add_argument("--replicates", type=int, default=5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="instances")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="run a heuristic on instance files")
    s.add_argument("instances", nargs="+", help="instance files or directories")
    s.add_argument("--algo", choices=["uba", "uba+dp", "alns"], default="alns")
    s.add_argument("--variant", choices=["VS", "M", "STD"])
    s.add_argument("--visibility", choices=["unique", "common", "none"])
    s.add_argument("--seed", type=int, help="master seed for the replications")
    s.add_argument("--replications", type=int, default=5)
    s.add_argument("--theta", type=int)
    s.add_argument("--theta-extra", type=int)
    s.add_argument("--params", help="JSON file with search parameters")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out", help="directory for runs.csv and solutions (stdout if omitted)")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exact solution of tiny instances")
    o.add_argument("instances", nargs="+")
    o.add_argument("--variant", choices=["VS", "M", "STD"], default="VS")
    o.add_argument("--out")
    o.set_defaults(func=cmd_oracle)

    e = sub.add_parser("emit-lp", help="write the mixed-integer model in LP format")
    e.add_argument("instance")
    e.add_argument("--variant", choices=["VS", "M", "STD"], default="VS")
    e.add_argument("--mu", type=float, help="upper bound on the objective")
    e.add_argument("--out")
    e.set_defaults(func=cmd_emit_lp)

    r = sub.add_parser("report", help="comparison table from run CSV files")
    r.add_argument("runs", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
