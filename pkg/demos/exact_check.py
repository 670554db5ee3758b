"""Cross-checking the search against exact answers on a tiny instance.

The oracle enumerates every crew split and route; the search should reach
the same value.  The heuristic solution is then substituted into every row
of the mixed-integer model.
"""
from hhsrp.alns import AlnsParams, run
from hhsrp.instancegen import InstanceClassSpec, generate
from hhsrp.milp import MilpVariant, check_residuals, emit_lp
from hhsrp.oracle import exact_solve

inst = generate(InstanceClassSpec(5, 20, 1, seed=1004, n_caregivers=4))
sol, exact = exact_solve(inst, "VS")
found = run(inst, AlnsParams(theta=2000, theta_extra=500, seed=4))
print(f"exact optimum {exact.total:.3f}, search found {found.objective:.3f}")
print("optimal routes:", sol.routes, "drops at", sorted(sol.drops))

rep = check_residuals(found.best, None, inst, MilpVariant("VS"))
lines = emit_lp(inst).count("\n")
print(f"model has {lines} LP lines; worst row violation {rep.max_violation:.1e}, objective gap {rep.objective_gap:.1e}")
