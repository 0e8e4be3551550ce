"""Three agents share one unit of resource per unit of demand; watch y settle.

The small instance E3 has a unique master optimum y = (0, 1, 5) with total
cost -17. The run uses a complete graph and prints every 250th round.

    python3 demos/e3_convergence.py
"""

import numpy as np

from pdmilp.agent import AlgoConfig, StepSchedule
from pdmilp.analysis import solve_master_central
from pdmilp.model import e3
from pdmilp.network import make_graph, run_rounds

inst = e3()
ref = solve_master_central(inst)
print("centralized master: y =", np.ravel(ref.y).tolist(), " sum p =", ref.p.sum())

# a small M keeps steps tame; early rounds may still touch it (logged as a warning)
cfg = AlgoConfig(M=10.0, step=StepSchedule(0.1, 0.8), recovery_every=250)
trace = run_rounds(inst, make_graph("complete", 3), 0.0, cfg, 2000)

print(f"{'t':>5} {'sum c z':>10} {'y':>28} {'recovered cost':>15}")
for r in trace.rows:
    if r.feasible is None:
        continue
    y = np.round(np.ravel(r.y), 4).tolist()
    print(f"{r.t:>5} {np.sum(r.J_lp):>10.4f} {str(y):>28} {r.milp_cost:>15.1f}")
print("max conservation error:", trace.conservation_error())
