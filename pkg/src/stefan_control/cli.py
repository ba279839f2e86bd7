"""Command-line experiment runner.

Usage::

    python -m stefan_control --command control --config fig.cfg --out out/ --tol 1e-6

Commands: simulate, control, spectrum, observability, lr, series, check-all.
Exit status: 0 all checks pass, 1 a check failed, 2 invalid configuration,
3 solver failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import control as ctl
from .config import ConfigError, ExperimentConfig, dump_config, load_config
from .model import ControlRegion, InvalidInputError, State, preset_initial_data
from .spectral import SPECTRUM_HEADER, RootFindingError, spectral_checks, spectrum
from .stepper import CNPropagator, FactorizationError, duality_gap, simulate
from . import synthesis as syn

log = logging.getLogger("stefan_control")

COMMANDS = ("simulate", "control", "spectrum", "observability", "lr", "series", "check-all")
EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


class Run:
    """Collects checks and artifacts for one command invocation."""

    def __init__(self, cfg: ExperimentConfig, command: str, out: Path):
        self.cfg = cfg
        self.command = command
        self.out = out
        self.checks: Dict[str, dict] = {}
        self.values: Dict[str, object] = {}
        self.artifacts: List[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def check(self, name: str, passed: bool, **values) -> None:
        self.checks[name] = {"passed": bool(passed), **{k: _jsonable(v) for k, v in values.items()}}
        log.info("%s %s %s", "PASS" if passed else "FAIL", name, values)

    def path(self, name: str) -> Path:
        p = self.out / name
        self.artifacts.append(name)
        return p

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks.values())

    def write_summary(self) -> Path:
        summary = {"command": self.command, "seed": self.cfg.seed,
                   "config": dump_config(self.cfg), "checks": self.checks,
                   "values": {k: _jsonable(v) for k, v in self.values.items()},
                   "artifacts": sorted(set(self.artifacts)), "passed": self.passed}
        path = self.out / "summary.json"
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return path


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    return v


def _write_rows(path: Path, schema: str, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"# schema {schema} v1"])
        w.writerow(list(header))
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])


def _initial_state(cfg: ExperimentConfig) -> State:
    name = cfg.initial
    if Path(name).suffix in (".npz",) and Path(name).exists():
        data = np.load(name)
        return State(data["y"], data["h"])
    return preset_initial_data(name, cfg.grid, cfg.domain)


# ---------------------------------------------------------------- commands


def cmd_simulate(run: Run) -> None:
    cfg = run.cfg
    prob = ctl.FullProblem.build(cfg.grid, cfg.domain, cfg.region)
    traj = simulate(prob.A, prob.B, _initial_state(cfg), None, cfg.grid, cfg.domain)
    traj.to_csv(run.path("trajectory.csv"))
    e = traj.energies
    worst = float(np.max(np.diff(e) / np.maximum(e[:-1], 1e-300))) if e.size > 1 else 0.0
    if cfg.domain.sigma > 0:
        run.check("energy_non_increasing", worst <= 1e-10, worst_relative_increase=worst)
    run.values["final_energy"] = float(e[-1])


def cmd_control(run: Run) -> None:
    cfg = run.cfg
    z0 = _initial_state(cfg)
    sol = ctl.solve_minimal_norm_control(z0, cfg)
    traj = sol.extras["trajectory"]
    times = cfg.grid.times
    ctl.write_norm_series(sol, times, run.path("control_norm.csv"))
    traj.to_csv(run.path("trajectory.csv"))
    norms = traj.component_norms()
    _write_long(run.path("plot_control_norm.csv"), times, "control_l2_omega", sol.norm_series())
    _write_long(run.path("plot_y_norm.csv"), times, "y_norm", norms[:, 0])
    _write_long(run.path("plot_h_norm.csv"), times, "h_norm", norms[:, 1])
    z0n = sol.extras["z0_norm"]
    ry, rh = sol.terminal_y_norm / z0n, sol.terminal_h_norm / z0n
    run.check("terminal_y", ry <= cfg.tol, relative=ry)
    run.check("terminal_h", rh <= cfg.tol, relative=rh)
    run.values.update(control_norm=sol.control_norm, backend=sol.backend,
                      control_nodes=int(sol.control.u.shape[1]))


def cmd_spectrum(run: Run) -> None:
    p = run.cfg.params
    rows = []
    worst = {}
    for sigma in p["spectrum.sigmas"]:
        for n in range(1, p["spectrum.n_max"] + 1):
            rep = spectral_checks(n, sigma, p["spectrum.K"])
            for name, ok in rep.checks.items():
                worst.setdefault(name, True)
                worst[name] &= ok
            rows.extend(spectrum(n, sigma, p["spectrum.K"]).rows())
    _write_rows(run.path("spectrum.csv"), "spectrum", ["sigma"] + SPECTRUM_HEADER,
                [[s] + r for s, r in zip(_sigma_column(p), rows)])
    for name, ok in sorted(worst.items()):
        run.check(f"spectrum_{name}", ok)


def _sigma_column(p):
    for sigma in p["spectrum.sigmas"]:
        for _ in range(p["spectrum.n_max"] * p["spectrum.K"]):
            yield repr(float(sigma))


def cmd_observability(run: Run) -> None:
    p = run.cfg.params
    n, sigma, K = p["observability.n"], p["observability.sigma"], p["observability.K"]
    window = tuple(p["observability.window"])
    Ts = sorted(p["observability.T_grid"])
    table = ctl.cost_table(n, sigma, window, K, Ts)
    ks = [c.K_est for c in table]
    fit = ctl.fit_cost(Ts, ks)
    _write_rows(run.path("costs.csv"), "costs", ["n", "T", "sigma", "c", "d", "K", "K_est"],
                [[n, c.T, sigma, window[0], window[1], K, c.K_est] for c in table])
    mono = all(b <= a for a, b in zip(ks, ks[1:]))
    run.check("cost_monotone", mono)
    run.check("cost_fit", fit.r2 >= 0.95, r2=fit.r2, a=fit.a, b=fit.b, M=fit.M)


def cmd_lr(run: Run) -> None:
    cfg = run.cfg
    p = cfg.params
    dom = cfg.domain.__class__(horizontal_period=cfg.domain.horizontal_period,
                               sigma=cfg.domain.sigma, horizon=p["lr.horizon"])
    region = ControlRegion.rectangle(*p["lr.bounds"])
    from .model import GridSpec
    z0 = preset_initial_data(cfg.initial, GridSpec.from_domain(dom, cfg.grid.nx, 1), dom)
    sol = syn.lr_synthesize(z0, cfg.grid.nx, dom, region, p["lr.beta"], p["lr.J"],
                            p["lr.steps_per_half"])
    syn.write_synthesis_report(sol, run.path("synthesis.csv"))
    recs = sol.extras["records"]
    norms = [r.control_norm for r in recs]
    run.check("lr_final", sol.extras["final_relative"] <= 1e-4,
              final_relative=sol.extras["final_relative"])
    run.check("lr_control_norms_decreasing", syn.eventually_decreasing(norms), norms=norms)
    run.check("lr_low_mode_residual", max(r.mid_low_residual for r in recs) <= 1e-6,
              worst=max(r.mid_low_residual for r in recs))
    d = syn.replay_defect(sol, dom)
    run.check("lr_replay", d <= 1e-9, defect=d)


def cmd_series(run: Run) -> None:
    p = run.cfg.params
    c, d, N = p["series.c"], p["series.d"], p["series.N"]
    s, closed = ctl.series_lemma(c, d, N)
    run.values.update(partial_sum=s, closed_form=closed, N=N, c=c, d=d)
    run.check("series_convergence", abs(s - closed) <= 1e-3, error=abs(s - closed))


def cmd_check_all(run: Run) -> None:
    """Desk-scale aggregate of the invariant checks."""
    cfg = run.cfg
    rng = np.random.default_rng(cfg.seed)
    for sigma in (10.0, 0.0):
        sub = cfg.with_sigma(sigma)
        z0 = preset_initial_data("fig_hum", sub.grid, sub.domain)
        sol = ctl.solve_minimal_norm_control(z0, sub, "kkt")
        rel = math.hypot(sol.terminal_y_norm, sol.terminal_h_norm) / sol.extras["z0_norm"]
        run.check(f"fig_hum_sigma{sigma:g}", rel <= cfg.tol, terminal_relative=rel,
                  control_norm=sol.control_norm)
    small = cfg.with_grid(nx=8, nt=50)
    prob = ctl.FullProblem.build(small.grid, small.domain, small.region)
    gaps = [ctl.backend_agreement(rng.standard_normal(prob.lin.n), small, prob) for _ in range(2)]
    run.check("backend_agreement", max(gaps) <= 1e-4, gaps=gaps)
    z0, zt = rng.standard_normal(prob.lin.n), rng.standard_normal(prob.lin.n)
    u = rng.standard_normal((small.grid.nt + 1, prob.lin.m))
    dg = duality_gap(prob.lin.prop, z0, u, zt, small.grid.nt)
    run.check("duality", dg <= 1e-10, gap=dg)
    p, q = rng.standard_normal(prob.lin.n), rng.standard_normal(prob.lin.n)
    gp, gq = prob.lin.gramian_apply(p), prob.lin.gramian_apply(q)
    sym = abs(gp @ q - p @ gq) / abs(gp @ q)
    run.check("gramian_symmetry", sym <= 1e-10, defect=sym)
    run.command = "simulate"
    cmd_simulate(run)
    sub = dict(run.cfg.params)
    run.cfg.params.update({"spectrum.n_max": min(sub["spectrum.n_max"], 50)})
    cmd_spectrum(run)
    for n in (1, 4, 10):
        for sigma in run.cfg.params["spectrum.sigmas"]:
            rep = syn.decay_rate_check(n, sigma)
            run.check(f"decay_n{n}_sigma{sigma:g}", rep.passed, rate=rep.rate, bound=rep.bound,
                      lambda0=rep.lambda0)
    cmd_observability(run)
    cmd_series(run)
    cmd_lr(run)
    run.command = "check-all"


def _write_long(path: Path, times, series: str, values) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "series", "value"])
        for t, v in zip(times, values):
            w.writerow([repr(float(t)), series, repr(float(v))])


def emit_plot_data(paths: Sequence, out_dir=None) -> List[Path]:
    """Convert wide CSV artifacts with a ``t`` column into ``(t, series, value)`` tables."""
    written = []
    for path in map(Path, paths):
        if not path.exists():
            raise FileNotFoundError(f"missing artifact {path}")
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        target = Path(out_dir or path.parent) / f"{path.stem}_long.csv"
        with open(target, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "series", "value"])
            if rows and "t" in rows[0]:
                header, body = rows[0], rows[1:]
                ti = header.index("t")
                for name in (h for h in header if h != "t"):
                    ci = header.index(name)
                    for r in body:
                        w.writerow([r[ti], name, r[ci]])
        written.append(target)
    return written


HANDLERS: Dict[str, Callable[[Run], None]] = {
    "simulate": cmd_simulate, "control": cmd_control, "spectrum": cmd_spectrum,
    "observability": cmd_observability, "lr": cmd_lr, "series": cmd_series,
    "check-all": cmd_check_all,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stefan_control", description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, help="flat key = value configuration file")
    ap.add_argument("--command", choices=COMMANDS, default="check-all")
    ap.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    ap.add_argument("--seed", type=int, help="seed for randomized checks")
    ap.add_argument("--tol", type=float, help="terminal tolerance (overrides control.tol)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a configuration key")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def run_experiment(cfg: ExperimentConfig, command: str, out: Optional[Path] = None) -> int:
    run = Run(cfg, command, Path(out or cfg.output_dir))
    try:
        HANDLERS[command](run)
    except (ctl.SolverError, FactorizationError, RootFindingError) as exc:
        log.error("solver failure: %s %s", exc, getattr(exc, "diagnostics", ""))
        run.check("solver", False, error=str(exc))
        run.write_summary()
        return EXIT_SOLVER
    run.write_summary()
    return EXIT_OK if run.passed else EXIT_CHECK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    overrides = {}
    for item in args.set:
        key, _, value = item.partition("=")
        overrides[key.strip()] = value
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if args.tol is not None:
        overrides["control.tol"] = repr(args.tol)
    try:
        cfg = load_config(args.config, overrides=overrides)
    except (ConfigError, InvalidInputError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    status = run_experiment(cfg, args.command, args.out)
    print(json.dumps({"command": args.command, "status": status,
                      "summary": str(Path(args.out or cfg.output_dir) / "summary.json")}))
    return status


if __name__ == "__main__":
    sys.exit(main())
