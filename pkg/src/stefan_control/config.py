"""Experiment configuration: flat ``key = value`` files with dotted keys.

Example::

    # tilted-band setup
    domain.sigma = 10
    domain.horizon = 0.1
    grid.nx = 12
    grid.nt = 200
    region.kind = tilted_band
    region.half_width = 2
    initial = fig_hum
    control.backend = kkt

Every key may be overridden from the environment with the prefix
``STEFANCTL_`` and ``__`` in place of dots, e.g. ``STEFANCTL_DOMAIN__SIGMA=0``.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from .model import ControlRegion, DomainConfig, GridSpec, InvalidInputError

ENV_PREFIX = "STEFANCTL_"
_SECTION = "config"


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` maps field names to messages."""

    def __init__(self, errors: Dict[str, str]):
        self.errors = dict(errors)
        super().__init__("; ".join(f"{k}: {v}" for k, v in self.errors.items()))


def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(t) for t in text.replace(",", " ").split())


def _ints(text: str) -> Tuple[int, ...]:
    return tuple(int(t) for t in text.replace(",", " ").split())


# key -> (converter, default)
SCHEMA = {
    "domain.period": (float, 2.0),
    "domain.sigma": (float, 10.0),
    "domain.horizon": (float, 0.1),
    "grid.nx": (int, 12),
    "grid.nt": (int, 200),
    "region.kind": (str, "tilted_band"),
    "region.bounds": (_floats, (0.5, 1.5, -0.5, 0.2)),
    "region.start_x1": (float, 0.5),
    "region.end_x1": (float, 1.5),
    "region.slope": (float, 1.0),
    "region.half_width": (float, 2.0),
    "region.center_x2": (float, 0.0),
    "initial": (str, "fig_hum"),
    "control.backend": (str, "kkt"),
    "control.tol": (float, 1e-6),
    "control.cg_maxiter": (int, 20000),
    "spectrum.n_max": (int, 50),
    "spectrum.sigmas": (_floats, (0.5, 2.0, 10.0)),
    "spectrum.K": (int, 20),
    "observability.n": (int, 1),
    "observability.sigma": (float, 10.0),
    "observability.window": (_floats, (-0.5, 0.2)),
    "observability.K": (int, 32),
    "observability.T_grid": (_floats, (0.05, 0.1, 0.15, 0.2, 0.3, 0.5)),
    "lr.beta": (float, 1.0),
    "lr.J": (int, 6),
    "lr.horizon": (float, 0.5),
    "lr.steps_per_half": (int, 2),
    "lr.bounds": (_floats, (0.5, 1.5, -0.5, 0.2)),
    "series.c": (float, 0.0),
    "series.d": (float, 0.5),
    "series.N": (int, 10000),
    "output.dir": (str, "out"),
    "seed": (int, 20240101),
}


@dataclass
class ExperimentConfig:
    domain: DomainConfig
    grid: GridSpec
    region: ControlRegion
    initial: str = "fig_hum"
    backend: str = "kkt"
    tol: float = 1e-6
    cg_maxiter: int = 20000
    seed: int = 20240101
    output_dir: Path = Path("out")
    params: Dict[str, object] = field(default_factory=dict)

    def with_sigma(self, sigma: float) -> "ExperimentConfig":
        dom = dataclasses.replace(self.domain, sigma=sigma)
        return dataclasses.replace(self, domain=dom)

    def with_grid(self, nx: Optional[int] = None, nt: Optional[int] = None,
                  horizon: Optional[float] = None) -> "ExperimentConfig":
        dom = self.domain if horizon is None else dataclasses.replace(self.domain, horizon=horizon)
        grid = GridSpec.from_domain(dom, nx or self.grid.nx, nt or self.grid.nt)
        return dataclasses.replace(self, domain=dom, grid=grid)


def read_pairs(path) -> Dict[str, str]:
    """Parse a flat key/value file into a dict of raw strings."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    text = Path(path).read_text()
    try:
        parser.read_string(f"[{_SECTION}]\n{text}", source=str(path))
    except configparser.Error as exc:
        raise ConfigError({"file": str(exc).splitlines()[0]}) from exc
    return dict(parser[_SECTION])


def env_overrides(environ: Mapping[str, str]) -> Dict[str, str]:
    out = {}
    for key, value in environ.items():
        if key.startswith(ENV_PREFIX):
            out[key[len(ENV_PREFIX):].lower().replace("__", ".")] = value
    return out


def _canonical(key: str) -> Optional[str]:
    for k in SCHEMA:
        if k.lower() == key.lower():
            return k
    return None


def build_config(raw: Mapping[str, str]) -> ExperimentConfig:
    """Validate raw strings against :data:`SCHEMA`; reports every bad field."""
    errors: Dict[str, str] = {}
    values = {k: default for k, (_, default) in SCHEMA.items()}
    for key, text in raw.items():
        canon = _canonical(key)
        if canon is None:
            errors[key] = "unknown key"
            continue
        conv = SCHEMA[canon][0]
        try:
            values[canon] = conv(text.strip())
        except ValueError:
            errors[canon] = f"cannot parse {text!r}"
    if errors:
        raise ConfigError(errors)

    def check(name, cond, msg):
        if not cond:
            errors[name] = msg

    check("control.backend", values["control.backend"] in ("kkt", "gramian_cg"),
          "must be kkt or gramian_cg")
    check("control.tol", values["control.tol"] > 0, "must be > 0")
    check("spectrum.K", values["spectrum.K"] >= 1, "must be >= 1")
    check("spectrum.n_max", values["spectrum.n_max"] >= 1, "must be >= 1")
    check("observability.K", values["observability.K"] >= 4, "must be >= 4")
    check("observability.window", len(values["observability.window"]) == 2,
          "needs two numbers c, d")
    check("observability.T_grid", len(values["observability.T_grid"]) >= 2
          and all(t > 0 for t in values["observability.T_grid"]), "needs >= 2 positive times")
    check("region.bounds", len(values["region.bounds"]) == 4, "needs four numbers a, b, c, d")
    check("lr.bounds", len(values["lr.bounds"]) == 4, "needs four numbers a, b, c, d")
    check("lr.J", 1 <= values["lr.J"] <= 12, "must be in 1..12")
    check("lr.beta", values["lr.beta"] > 0, "must be > 0")
    check("series.N", values["series.N"] >= 1, "must be >= 1")
    c, d = values["series.c"], values["series.d"]
    check("series.c", -1 < c < d < 1, "need -1 < c < d < 1")

    domain = grid = region = None
    try:
        domain = DomainConfig(horizontal_period=values["domain.period"],
                              sigma=values["domain.sigma"], horizon=values["domain.horizon"])
    except InvalidInputError as exc:
        errors["domain"] = str(exc)
    if domain is not None:
        try:
            grid = GridSpec.from_domain(domain, values["grid.nx"], values["grid.nt"])
        except InvalidInputError as exc:
            errors["grid"] = str(exc)
    try:
        if values["region.kind"] == "rectangle" and len(values["region.bounds"]) == 4:
            region = ControlRegion.rectangle(*values["region.bounds"])
        else:
            region = ControlRegion(kind=values["region.kind"], start_x1=values["region.start_x1"],
                                   end_x1=values["region.end_x1"], slope=values["region.slope"],
                                   half_width=values["region.half_width"],
                                   center_x2=values["region.center_x2"])
    except InvalidInputError as exc:
        errors["region"] = str(exc)
    if grid is not None and region is not None and not errors:
        from .assembly import control_nodes
        if control_nodes(grid, region).size == 0:
            errors["region"] = "region contains no grid node"
    if errors:
        raise ConfigError(errors)

    params = {k: v for k, v in values.items()
              if k.split(".")[0] in ("spectrum", "observability", "lr", "series")}
    return ExperimentConfig(domain=domain, grid=grid, region=region, initial=values["initial"],
                            backend=values["control.backend"], tol=values["control.tol"],
                            cg_maxiter=values["control.cg_maxiter"], seed=values["seed"],
                            output_dir=Path(values["output.dir"]), params=params)


def load_config(path=None, environ: Optional[Mapping[str, str]] = None,
                overrides: Optional[Mapping[str, str]] = None) -> ExperimentConfig:
    raw: Dict[str, str] = {}
    if path is not None:
        raw.update(read_pairs(path))
    raw.update(env_overrides(os.environ if environ is None else environ))
    if overrides:
        raw.update(overrides)
    return build_config(raw)


def default_config(**overrides) -> ExperimentConfig:
    """Defaults with optional ``section_key=value`` overrides (``__`` for the dot)."""
    raw = {k.replace("__", "."): str(v) for k, v in overrides.items()}
    return build_config(raw)


def dump_config(cfg: ExperimentConfig) -> List[str]:
    """Flat representation used in run summaries."""
    d = cfg.domain
    lines = [f"domain.period = {d.horizontal_period!r}", f"domain.sigma = {d.sigma!r}",
             f"domain.horizon = {d.horizon!r}", f"grid.nx = {cfg.grid.nx}",
             f"grid.nt = {cfg.grid.nt}", f"region.kind = {cfg.region.kind}",
             f"initial = {cfg.initial}", f"control.backend = {cfg.backend}",
             f"control.tol = {cfg.tol!r}", f"seed = {cfg.seed}"]
    for k, v in sorted(cfg.params.items()):
        lines.append(f"{k} = {v}")
    return lines
