"""Domain types, preset data, discrete energy and curvature evaluators.

Conventions used throughout the package:

* horizontal nodes ``x1_i = i*dx`` for ``i = 1..n1`` (periodic, ``n1 = L/dx``),
* vertical interior nodes ``x2_j = -1 + j*dx`` for ``j = 1..nx``,
* ``y`` is stored as an ``(n1, nx)`` array indexed ``y[i-1, j-1]``,
* the flat state is ``(y[:, 0], y[:, 1], ..., y[:, nx-1], h)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np


class InvalidInputError(ValueError):
    """Raised when an operation receives data outside its domain."""


@dataclass(frozen=True)
class DomainConfig:
    """Strip ``(0, L) x (-1, 1)`` with surface tension and time horizon."""

    horizontal_period: float = 2.0
    sigma: float = 10.0
    horizon: float = 0.1
    vertical_extent: Tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if not self.horizontal_period > 0:
            raise InvalidInputError("horizontal_period must be > 0")
        if not self.horizon > 0:
            raise InvalidInputError("horizon must be > 0")
        if not self.sigma >= 0:
            raise InvalidInputError("sigma must be >= 0")
        if tuple(self.vertical_extent) != (-1.0, 1.0):
            raise InvalidInputError("vertical_extent is fixed to (-1, 1)")


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid with equal horizontal and vertical mesh size.

    ``nx`` counts vertical interior nodes, so ``dx = 2/(nx+1)``.  The number
    of horizontal nodes is ``n1 = L/dx``, which must be an integer; for the
    default period ``L = 2`` this gives ``n1 = nx + 1``.
    """

    nx: int
    nt: int
    horizon: float
    horizontal_period: float = 2.0

    def __post_init__(self):
        if self.nx < 2:
            raise InvalidInputError(f"nx must be >= 2, got {self.nx}")
        if self.nt < 1:
            raise InvalidInputError(f"nt must be >= 1, got {self.nt}")
        if not self.horizon > 0:
            raise InvalidInputError("horizon must be > 0")
        ratio = self.horizontal_period / self.dx
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise InvalidInputError(
                f"period {self.horizontal_period} is not a multiple of dx = {self.dx}")

    @classmethod
    def from_domain(cls, domain: DomainConfig, nx: int, nt: int) -> "GridSpec":
        return cls(nx=nx, nt=nt, horizon=domain.horizon,
                   horizontal_period=domain.horizontal_period)

    @property
    def dx(self) -> float:
        return 2.0 / (self.nx + 1)

    @property
    def dt(self) -> float:
        return self.horizon / self.nt

    @property
    def n1(self) -> int:
        return int(round(self.horizontal_period / self.dx))

    @property
    def ny(self) -> int:
        return self.n1 * self.nx

    @property
    def size(self) -> int:
        return self.ny + self.n1

    @property
    def x1(self) -> np.ndarray:
        return np.arange(1, self.n1 + 1) * self.dx

    @property
    def x2(self) -> np.ndarray:
        return -1.0 + np.arange(1, self.nx + 1) * self.dx

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.nt + 1)


@dataclass
class State:
    """Interior temperature samples ``y`` (shape ``(n1, nx)``) and heights ``h``."""

    y: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        if self.y.ndim != 2 or self.h.shape != (self.y.shape[0],):
            raise InvalidInputError(
                f"inconsistent state shapes y{self.y.shape} h{self.h.shape}")

    def flat(self) -> np.ndarray:
        return np.concatenate([self.y.T.ravel(), self.h])

    @classmethod
    def from_flat(cls, z: np.ndarray, grid: GridSpec) -> "State":
        z = np.asarray(z)
        if z.shape != (grid.size,):
            raise InvalidInputError(f"flat state has size {z.shape}, expected {grid.size}")
        y = z[:grid.ny].reshape(grid.nx, grid.n1).T.copy()
        return cls(y=y, h=z[grid.ny:].copy())

    @classmethod
    def zeros(cls, grid: GridSpec) -> "State":
        return cls(np.zeros((grid.n1, grid.nx)), np.zeros(grid.n1))

    def check(self, grid: GridSpec) -> None:
        if self.y.shape != (grid.n1, grid.nx):
            raise InvalidInputError(f"y has shape {self.y.shape}, grid expects {(grid.n1, grid.nx)}")


@dataclass(frozen=True)
class ControlRegion:
    """Control set.  ``kind`` is ``"rectangle"`` or ``"tilted_band"``.

    Rectangle parameters are ``(a, b, c, d)``: ``a <= x1 <= b``, ``c <= x2 <= d``.
    A tilted band is the set of nodes within ``half_width * dx`` of the segment
    of the line ``x2 = center_x2 + slope*(x1 - mid)`` over ``start_x1 <= x1 <= end_x1``.
    """

    kind: str = "tilted_band"
    a: float = 0.5
    b: float = 1.5
    c: float = -0.5
    d: float = 0.2
    start_x1: float = 0.5
    end_x1: float = 1.5
    slope: float = 1.0
    half_width: float = 2.0
    center_x2: float = 0.0

    def __post_init__(self):
        if self.kind == "rectangle":
            if not (self.a < self.b and self.c < self.d):
                raise InvalidInputError("rectangle needs a < b and c < d")
            if self.c < -1 or self.d > 1:
                raise InvalidInputError("rectangle must lie inside (-1, 1) vertically")
        elif self.kind == "tilted_band":
            if not self.start_x1 <= self.end_x1:
                raise InvalidInputError("band needs start_x1 <= end_x1")
            if self.half_width < 0:
                raise InvalidInputError("half_width must be >= 0")
        else:
            raise InvalidInputError(f"unknown region kind {self.kind!r}")

    @classmethod
    def rectangle(cls, a, b, c, d) -> "ControlRegion":
        return cls(kind="rectangle", a=a, b=b, c=c, d=d)

    @classmethod
    def tilted_band(cls, start_x1, end_x1, slope, half_width, center_x2=0.0) -> "ControlRegion":
        return cls(kind="tilted_band", start_x1=start_x1, end_x1=end_x1,
                   slope=slope, half_width=half_width, center_x2=center_x2)

    def contains(self, x1: float, x2: float, dx: float) -> bool:
        if self.kind == "rectangle":
            eps = 1e-12
            return (self.a - eps <= x1 <= self.b + eps) and (self.c - eps <= x2 <= self.d + eps)
        mid = 0.5 * (self.start_x1 + self.end_x1)
        p0 = np.array([self.start_x1, self.center_x2 + self.slope * (self.start_x1 - mid)])
        p1 = np.array([self.end_x1, self.center_x2 + self.slope * (self.end_x1 - mid)])
        p = np.array([x1, x2])
        seg = p1 - p0
        length2 = float(seg @ seg)
        t = 0.0 if length2 == 0 else float(np.clip((p - p0) @ seg / length2, 0.0, 1.0))
        dist = float(np.linalg.norm(p - p0 - t * seg))
        return dist <= self.half_width * dx + 1e-9 * dx


@dataclass
class ControlField:
    """Nodal control values, one row per time level ``k = 0..nt``."""

    u: np.ndarray
    nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def __post_init__(self):
        self.u = np.atleast_2d(np.asarray(self.u, dtype=float))

    @classmethod
    def zeros(cls, nt: int, m: int) -> "ControlField":
        return cls(np.zeros((nt + 1, m)))


def _check_samples(h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.ndim != 1 or h.size < 3:
        raise InvalidInputError("need a 1D array of at least 3 height samples")
    return h


def periodic_first_difference(h: np.ndarray, dx: float) -> np.ndarray:
    """Centered first difference with wraparound."""
    return (np.roll(h, -1) - np.roll(h, 1)) / (2 * dx)


def periodic_second_difference(h: np.ndarray, dx: float) -> np.ndarray:
    return (np.roll(h, -1) - 2 * h + np.roll(h, 1)) / dx**2


def curvature(h_samples, dx: float) -> np.ndarray:
    """Mean curvature ``h'' / (1 + h'^2)^{3/2}`` from centered differences."""
    h = _check_samples(h_samples)
    d1 = periodic_first_difference(h, dx)
    d2 = periodic_second_difference(h, dx)
    return d2 / (1.0 + d1**2) ** 1.5


def nonlinear_boundary_term(h_samples, sigma: float, dx: float) -> np.ndarray:
    """Cubic remainder ``sigma*(kappa(h) - h'')`` of the Gibbs-Thomson condition."""
    h = _check_samples(h_samples)
    if sigma == 0:
        return np.zeros_like(h)
    return sigma * (curvature(h, dx) - periodic_second_difference(h, dx))


def discrete_energy(state: State, sigma: float, dx: float) -> float:
    """Rectangle-rule ``||y||^2 + sigma*||D+ h||^2``."""
    dh = (np.roll(state.h, -1) - state.h) / dx
    return float(dx**2 * np.sum(state.y**2) + sigma * dx * np.sum(dh**2))


def h_norm(state: State, sigma: float, dx: float) -> Tuple[float, float]:
    """Component norms in the discrete weighted space.

    ``||y||^2 = dx^2 sum y^2`` and ``||h||^2 = dx sum h^2 + sigma dx sum (D+ h)^2``.
    Both are diagonal in the horizontal Fourier modes.
    """
    dh = (np.roll(state.h, -1) - state.h) / dx
    ny = math.sqrt(dx**2 * float(np.sum(state.y**2)))
    nh = math.sqrt(dx * float(np.sum(state.h**2)) + sigma * dx * float(np.sum(dh**2)))
    return ny, nh


def state_norm(state: State, sigma: float, dx: float) -> float:
    ny, nh = h_norm(state, sigma, dx)
    return math.hypot(ny, nh)


def preset_initial_data(name: str, grid: GridSpec, domain: DomainConfig,
                        n: Optional[int] = None, k: int = 0) -> State:
    """Preset initial states.

    ``fig_hum`` is ``y = 70 sin(2 pi x1/L) sin(pi x2)``, ``h = x1 (L - x1)``
    (for ``L = 2`` this is ``70 sin(pi x1) sin(pi x2)`` and ``x1 (2 - x1)``).
    The boundary row ``y_{i,nx+1} = sigma * D2 h`` is never stored, so the
    compatibility condition holds by construction.

    ``single_mode`` takes horizontal index ``n`` and vertical index ``k``; the
    vertical profile is the ``k``-th eigenvector of the discrete mode operator,
    so the state is an exact eigenvector of the assembled system.
    Names may also be given as ``"single_mode(n, k)"``.
    """
    name = name.strip()
    if name.startswith("single_mode(") and name.endswith(")"):
        args = [int(a) for a in name[len("single_mode("):-1].split(",")]
        n, k = args[0], (args[1] if len(args) > 1 else 0)
        name = "single_mode"
    L = grid.horizontal_period
    x1, x2 = grid.x1, grid.x2
    if name == "zero":
        return State.zeros(grid)
    if name == "fig_hum":
        y = 70 * np.outer(np.sin(2 * np.pi * x1 / L), np.sin(np.pi * x2))
        return State(y, x1 * (L - x1))
    if name == "single_mode":
        from .assembly import discrete_symbol, mode_eigenvectors
        if n is None or not 0 <= n <= grid.n1 // 2:
            raise InvalidInputError(f"single_mode needs 0 <= n <= {grid.n1 // 2}")
        vals, vecs = mode_eigenvectors(discrete_symbol(n, grid), domain.sigma, grid.nx)
        if not 0 <= k < vals.size:
            raise InvalidInputError(f"single_mode index k={k} out of range")
        v = vecs[:, k]
        wave = np.cos(2 * np.pi * n * x1 / L)
        return State(np.outer(wave, v[:-1]), wave * v[-1])
    raise InvalidInputError(f"unknown preset {name!r}")
