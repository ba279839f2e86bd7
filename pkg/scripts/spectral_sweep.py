"""Eigenvalue tables and spectral checks over n = 1..n_max for several sigma."""
import argparse
import time
from pathlib import Path

from stefan_control.spectral import spectral_checks, spectrum

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--n-max", type=int, default=50)
ap.add_argument("-K", type=int, default=20)
ap.add_argument("--sigmas", type=float, nargs="+", default=[0.5, 2.0, 10.0])
ap.add_argument("--out", type=Path, default=Path("out/spectrum"))
args = ap.parse_args()
args.out.mkdir(parents=True, exist_ok=True)

t0 = time.perf_counter()
for sigma in args.sigmas:
    failed = []
    worst = 0.0
    for n in range(1, args.n_max + 1):
        rep = spectral_checks(n, sigma, args.K)
        worst = max(worst, rep.max_residual)
        if not rep.passed:
            failed.append((n, [k for k, v in rep.checks.items() if not v]))
        spectrum(n, sigma, args.K).to_csv(args.out / f"sigma{sigma:g}_n{n}.csv")
    print(f"sigma={sigma:g}: max residual {worst:.2e}, failures {failed or 'none'}")
print(f"{time.perf_counter() - t0:.2f}s")
