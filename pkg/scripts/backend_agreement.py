"""KKT versus penalized Gramian-CG control norms on random data at nx = 8, nt = 50."""
import argparse
import time

import numpy as np

from stefan_control.config import default_config
from stefan_control.control import FullProblem, solve_minimal_norm_control

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--samples", type=int, default=5)
ap.add_argument("--seed", type=int, default=20240101)
args = ap.parse_args()

cfg = default_config(grid__nx=8, grid__nt=50)
prob = FullProblem.build(cfg.grid, cfg.domain, cfg.region)
rng = np.random.default_rng(args.seed)
print(f"state size {prob.lin.n}, control nodes {prob.lin.m}")
for i in range(args.samples):
    z0 = rng.standard_normal(prob.lin.n)
    t0 = time.perf_counter()
    a = solve_minimal_norm_control(z0, cfg, "kkt", prob)
    b = solve_minimal_norm_control(z0, cfg, "gramian_cg", prob)
    gap = abs(a.control_norm - b.control_norm) / a.control_norm
    print(f"{i}: kkt {a.control_norm:.10g}  cg {b.control_norm:.10g}  gap {gap:.1e}  "
          f"eps {b.extras['eps']:.1e}  cg iterations {b.iterations}  {time.perf_counter() - t0:.1f}s")
