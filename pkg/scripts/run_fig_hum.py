"""Minimal-norm null control of the fig_hum datum for sigma = 10 and sigma = 0.

Writes control-norm and state-norm series per sigma into ``--out``.
"""
import argparse
import time
from pathlib import Path

from stefan_control.cli import run_experiment
from stefan_control.config import default_config


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("out/fig_hum"))
    ap.add_argument("--backend", choices=["kkt", "gramian_cg"], default="kkt")
    args = ap.parse_args()
    for sigma in (10.0, 0.0):
        cfg = default_config(domain__sigma=sigma, control__backend=args.backend)
        t0 = time.perf_counter()
        status = run_experiment(cfg, "control", args.out / f"sigma{sigma:g}")
        print(f"sigma={sigma:g} status={status} {time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()
