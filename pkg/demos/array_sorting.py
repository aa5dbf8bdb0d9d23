"""
Assembling a defect-free row
============================

Stochastic loading fills about a quarter of the 24 sites.  An optimal
assignment moves reservoir atoms into the target row, routing around the
atoms still sitting in the array.
"""

import numpy as np

from intracavity.assembly import (GridSpec, Occupancy, Scenario, TargetPattern, build_sort_plan,
                                  sample_loading, success_curve)
from intracavity.assembly.grid import LoadingModel

grid = GridSpec()
occ = sample_loading(grid, LoadingModel(), np.random.default_rng(5))
pattern = TargetPattern.centered_row(grid, 4)
print(f"loaded {occ.count} atoms at sites {list(occ.sites)}; targets {sorted(pattern.sites)}")

plan = build_sort_plan(occ, pattern, grid)
for m in plan.moves:
    print(f"  move {m.from_site:2d} -> {m.to_site:2d}   {m.length * 1e6:5.2f} um   {len(m.path)} waypoints")
print(f"{len(plan.discards)} surplus atoms released, total time {plan.duration * 1e3:.1f} ms")
print("after the plan:", sorted(plan.apply(occ).sites))

# calibrated reproduction of the success curve against probabilistic loading
for n, p, lo, hi, pp, ratio in success_curve(Scenario(), range(2, 7), 1000, seed=0):
    print(f"n = {n}   p_T = {p:.3f} [{lo:.3f}, {hi:.3f}]   p_P = {pp:.2e}   ratio {ratio:.3g}")
