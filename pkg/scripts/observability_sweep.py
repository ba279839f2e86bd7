"""Truncated observability cost versus T and K, with the log fit ``log K = a + b/T``."""
import argparse

import numpy as np

from stefan_control.control import SolverError, cost_table, fit_cost

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("-n", type=int, default=1)
ap.add_argument("--sigma", type=float, default=10.0)
ap.add_argument("--window", type=float, nargs=2, default=[-0.5, 0.2])
ap.add_argument("--K", type=int, nargs="+", default=[12, 16, 24, 32, 36, 48])
ap.add_argument("--T", type=float, nargs="+", default=[0.05, 0.1, 0.15, 0.2, 0.3, 0.5])
args = ap.parse_args()

print("K   " + " ".join(f"T={t:<9g}" for t in args.T) + "  R^2")
for K in args.K:
    try:
        ks = [c.K_est for c in cost_table(args.n, args.sigma, tuple(args.window), K, args.T)]
    except SolverError as exc:
        print(f"{K:<3d} {exc}")
        continue
    fit = fit_cost(args.T, ks)
    print(f"{K:<3d} " + " ".join(f"{k:<11.4g}" for k in ks) + f"  {fit.r2:.4f}"
          + ("" if np.all(np.diff(ks) <= 0) else "  (not monotone)"))
