"""Shared vehicles with and without drops, against one vehicle per caregiver.

Runs the constructive heuristic and the three search variants on one
generated instance and prints the savings and the break-even cost ratio.
A short search budget keeps the demo under a minute.
"""
import sys

from hhsrp.alns import AlnsParams, run
from hhsrp.analysis import ber, improvement
from hhsrp.instancegen import InstanceClassSpec, generate
from hhsrp.uba import apply_dp_postpass, uba_solve
from hhsrp.core import objective

theta = int(sys.argv[1]) if len(sys.argv) > 1 else 500
inst = generate(InstanceClassSpec(30, 10, 0, replicate=0, seed=1))
print(f"instance {inst.name}: {inst.n} patients, {inst.n_caregivers} caregivers, {inst.n_vehicles} vehicles")

sol, uba = uba_solve(inst)
uba_dp = objective(apply_dp_postpass(sol, inst), inst).total
res = {v: run(inst, AlnsParams(theta=theta, theta_extra=theta // 10, variant=v, seed=0)) for v in ("VS", "M", "STD")}

print(f"UBA        {uba:9.2f}")
print(f"UBA+DP     {uba_dp:9.2f}  ({improvement(uba, uba_dp):5.1f}% better)")
for v, r in res.items():
    print(f"ALNS-{v:<5} {r.objective:9.2f}  drops {r.n_drops}")
vs, m, std = (res[v].objective for v in ("VS", "M", "STD"))
print(f"\ndrops save {improvement(m, vs):.1f}% over plain sharing")
print(f"break-even vehicle/labour cost ratio: {ber(vs, std, inst.capacity):.3f}")
