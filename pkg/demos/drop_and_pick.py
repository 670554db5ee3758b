"""Why dropping a caregiver off pays: a two-patient walk-through.

Caregiver 0 treats patient 1 (10 minutes), caregiver 1 treats patient 2
(4 minutes) three minutes away.  Without drops the vehicle waits at each
stop; with a drop both treatments run in parallel.
"""
import numpy as np

from hhsrp import Instance, Solution
from hhsrp.core import evaluate, objective

inst = Instance(coords=np.array([[0.0, 0.0], [5.0, 0.0], [5.0, 3.0]]), illness=np.array([-1, 0, 0]),
                service=np.array([0.0, 10.0, 4.0]), qualification=np.ones((2, 1), bool),
                n_vehicles=1, capacity=2)
end = inst.end

wait = Solution(2, [[0, 1, 2, end]], [(0, 1)], {1: 0, 2: 1})
drop = Solution(2, [[0, 1, 2, 1 + inst.n, end]], [(0, 1)], {1: 0, 2: 1}, {1})


def show(title, sol):
    tl = evaluate(sol, inst)
    print(title)
    for v in sol.routes[0]:
        print(f"  node {v:>2}: vehicle arrives {tl.av[v, 0]:5.1f}, waits {tl.w.get((v, 0), 0.0):5.1f}")
    print(f"  total flow time {objective(sol, inst, tl).total:.1f}\n")


show("vehicle waits at every patient", wait)
show("caregiver 0 dropped at patient 1, collected at its pick-up node", drop)
