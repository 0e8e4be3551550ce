"""Compare the uniform restriction with the per-row baseline on a small batch.

For each instance: is the restricted LP feasible under either restriction,
how large is the restriction relative to b, and how far is the recovered
solution from the centralized MILP optimum.

    python3 demos/restriction_comparison.py [count]
"""

import sys

import numpy as np

from pdmilp.analysis import compare_methods
from pdmilp.model import GeneratorParams

count = int(sys.argv[1]) if len(sys.argv) > 1 else 5
# cost weights of both signs give instances whose optimum is not a box corner
params = GeneratorParams(N=6, S=2, seed=0, box=5, n_integer=2, cost_weight_range=(-5, 0),
                         resource_range=(-30, -10))
rows = compare_methods(params, count)

print(f"{'id':>3} {'ours ok':>8} {'base ok':>8} {'gap':>5} {'|s|/|b| ours':>13} {'|s|/|b| base':>13} "
      f"{'subopt ours':>12} {'subopt base':>12}")
for r in rows:
    print(f"{r.instance_id:>3} {str(r.ours_applicable):>8} {str(r.baseline_applicable):>8} "
          f"{str(r.gap_present):>5} {r.rel_restriction_ours:>13.4f} {r.rel_restriction_baseline:>13.4f} "
          f"{r.rel_subopt_ours:>12.4f} {r.rel_subopt_baseline:>12.4f}" + (f"  {r.error}" if r.error else ""))
ours = np.mean([bool(r.ours_applicable) for r in rows])
base = np.mean([bool(r.baseline_applicable) for r in rows])
print(f"applicable: ours {ours:.0%}, baseline {base:.0%}")
