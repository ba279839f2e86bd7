"""Horizontal Fourier modes, low-mode projection and dyadic control synthesis."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import scipy.linalg as sla

from .assembly import assemble_control_injection, assemble_mode_operator, assemble_system
from .control import (ControlSolution, LinearControlProblem, SolverError, control_metric,
                      control_norm)
from .model import (ControlField, ControlRegion, DomainConfig, GridSpec, InvalidInputError,
                    State, h_norm, state_norm)
from .spectral import eigenfunction, spectrum
from .stepper import CNPropagator


@dataclass
class ModeDecomposition:
    """Real-data DFT along ``x1`` (orthonormal scaling, non-negative indices only).

    ``y_hat[p]`` holds the vertical profile of index ``p`` and ``h_hat[p]`` the
    height coefficient.  Indices ``0 < p < n1/2`` stand for the conjugate pair
    ``+-p`` and carry weight 2 in Parseval sums.
    """

    y_hat: np.ndarray
    h_hat: np.ndarray
    n1: int

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.h_hat.size)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.h_hat.size, 2.0)
        w[0] = 1.0
        if self.n1 % 2 == 0:
            w[-1] = 1.0
        return w

    def full_spectrum(self) -> Tuple[np.ndarray, np.ndarray]:
        """Coefficients for all ``n1`` indices, reconstructed by conjugate symmetry."""
        y = np.fft.fft(np.fft.irfft(self.y_hat, n=self.n1, axis=0, norm="ortho"),
                       axis=0, norm="ortho")
        h = np.fft.fft(np.fft.irfft(self.h_hat, n=self.n1, norm="ortho"), norm="ortho")
        return y, h

    def active(self, tol: float = 1e-12) -> List[int]:
        mag = np.sqrt(np.sum(np.abs(self.y_hat) ** 2, axis=1) + np.abs(self.h_hat) ** 2)
        scale = mag.max() if mag.size else 0.0
        return [int(p) for p in np.flatnonzero(mag > tol * max(scale, 1e-300))]


def dft_modes(state: State) -> ModeDecomposition:
    n1 = state.y.shape[0]
    return ModeDecomposition(np.fft.rfft(state.y, axis=0, norm="ortho"),
                             np.fft.rfft(state.h, norm="ortho"), n1)


def inverse_modes(dec: ModeDecomposition) -> State:
    y = np.fft.irfft(dec.y_hat, n=dec.n1, axis=0, norm="ortho")
    h = np.fft.irfft(dec.h_hat, n=dec.n1, norm="ortho")
    return State(y, h)


def project_low(state: State, mu: float) -> State:
    """Zero every horizontal index ``|p| > mu``."""
    if mu < 0:
        raise InvalidInputError("mu must be >= 0")
    dec = dft_modes(state)
    keep = dec.indices <= mu
    return inverse_modes(ModeDecomposition(dec.y_hat * keep[:, None], dec.h_hat * keep, dec.n1))


def low_mode_basis(grid: GridSpec, mu: float) -> np.ndarray:
    """Rows form an orthonormal basis of the range of ``project_low(., mu)`` on flat states."""
    rows = []
    n1, nx = grid.n1, grid.nx
    i = np.arange(n1)
    pmax = min(int(math.floor(mu)), n1 // 2)
    waves = []
    for p in range(pmax + 1):
        waves.append(np.cos(2 * np.pi * p * i / n1))
        if 0 < p and 2 * p != n1:
            waves.append(np.sin(2 * np.pi * p * i / n1))
    for w in waves:
        w = w / np.linalg.norm(w)
        for j in range(nx + 1):
            v = np.zeros(grid.size)
            v[j * n1:(j + 1) * n1] = w
            rows.append(v)
    return np.array(rows)


@dataclass
class InvarianceReport:
    max_leak: float
    commutator: float
    passed: bool


def mode_invariance_check(grid: GridSpec, domain: DomainConfig, seed: int = 0,
                          tol: float = 1e-12) -> InvarianceReport:
    """``A`` maps each horizontal mode to itself and commutes with ``project_low``."""
    A = assemble_system(grid, domain).matrix
    rng = np.random.default_rng(seed)
    i = np.arange(grid.n1)
    leak = 0.0
    for p in range(grid.n1 // 2 + 1):
        wave = np.cos(2 * np.pi * p * i / grid.n1 + rng.uniform(0, 2 * np.pi))
        z = State(np.outer(wave, rng.standard_normal(grid.nx)), wave * rng.standard_normal())
        out = dft_modes(State.from_flat(A @ z.flat(), grid))
        mag = np.sqrt(np.sum(np.abs(out.y_hat) ** 2, axis=1) + np.abs(out.h_hat) ** 2)
        others = np.delete(mag, p)
        leak = max(leak, float(others.max(initial=0.0) / mag.max()))
    comm = 0.0
    for mu in range(grid.n1 // 2 + 1):
        z = rng.standard_normal(grid.size)
        pa = project_low(State.from_flat(A @ z, grid), mu).flat()
        ap = A @ project_low(State.from_flat(z, grid), mu).flat()
        comm = max(comm, float(np.linalg.norm(pa - ap) / np.linalg.norm(A @ z)))
    return InvarianceReport(leak, comm, leak <= tol and comm <= tol)


# ---------------------------------------------------------------- decay


@dataclass
class DecayReport:
    n: float
    sigma: float
    rate: float
    bound: float
    lambda0: float
    window: Tuple[float, float]

    @property
    def within_gap(self) -> bool:
        return self.rate <= 0.9 * self.bound

    @property
    def above_top(self) -> bool:
        return self.rate >= 1.1 * self.lambda0

    @property
    def passed(self) -> bool:
        return self.within_gap and self.above_top


def eigen_datum(n, sigma, m: int, ks=(0,)) -> np.ndarray:
    """Samples of ``sum_k Phi_{n,k}`` on ``m`` interior nodes plus the height entry."""
    x = -1 + np.arange(1, m + 1) * (2.0 / (m + 1))
    spec = spectrum(n, sigma, max(ks) + 1)
    z = np.zeros(m + 1)
    for k in ks:
        phi, h = eigenfunction(spec.pairs[k], x)
        z[:m] += phi
        z[m] += h
    return z


def decay_rate_check(n, sigma: float, T_obs: Optional[float] = None,
                     datum: Optional[np.ndarray] = None, m: int = 200) -> DecayReport:
    """Log-slope of the weighted norm of a free mode-``n`` run over the late half of ``(0, T_obs)``.

    The default datum superposes the first four eigenfunctions.
    """
    if n == 0:
        raise InvalidInputError("n must be nonzero")
    spec = spectrum(n, sigma, 4)
    lam0 = spec.eigenvalues[0]
    z = eigen_datum(n, sigma, m, ks=(0, 1, 2, 3)) if datum is None else np.asarray(datum, float)
    T_obs = T_obs or 20.0 / abs(lam0)
    dom = DomainConfig(sigma=sigma, horizon=T_obs)
    op, metric = assemble_mode_operator(n, dom, m)
    nt = max(400, int(math.ceil(abs(spec.eigenvalues[-1]) * T_obs / 0.05)))
    prop = CNPropagator(op.matrix, T_obs / nt)
    norms = [metric.norm(z)]
    n0 = norms[0]
    for _ in range(nt):
        z = prop.step(z)
        norms.append(metric.norm(z))
        if norms[-1] < 1e-250 * n0:
            break  # shorten the window before underflow
    t = np.arange(len(norms)) * (T_obs / nt)
    half = len(norms) // 2
    rate = float(np.polyfit(t[half:], np.log(norms[half:]), 1)[0])
    bound = -min(sigma / 2, 1.0) * float(n) ** 2
    return DecayReport(n, sigma, rate, bound, float(lam0), (float(t[half]), float(t[-1])))


# ---------------------------------------------------------------- Lebeau-Robbiano


@dataclass(frozen=True)
class DyadicSchedule:
    """Intervals of length ``T_j = 2^{-j} T`` with thresholds ``mu_j = 2^j beta``.

    All half-intervals are whole multiples of ``dt = T / (2^{J+1} q)``.
    """

    T: float
    beta: float
    J: int
    q: int = 2

    def __post_init__(self):
        if self.J < 1 or self.q < 1 or not self.beta > 0 or not self.T > 0:
            raise InvalidInputError("need T > 0, beta > 0, J >= 1, q >= 1")

    @property
    def nt(self) -> int:
        return 2 ** (self.J + 1) * self.q

    @property
    def dt(self) -> float:
        return self.T / self.nt

    def lengths(self) -> List[float]:
        return [self.T * 2.0 ** -j for j in range(1, self.J + 1)]

    def thresholds(self) -> List[float]:
        return [self.beta * 2.0 ** j for j in range(1, self.J + 1)]

    def half_steps(self, j: int) -> int:
        return 2 ** (self.J - j) * self.q

    def starts(self) -> List[int]:
        """Step index at which interval ``j`` begins, plus the end of the last one."""
        out = [0]
        for j in range(1, self.J + 1):
            out.append(out[-1] + 2 * self.half_steps(j))
        return out


@dataclass
class IntervalRecord:
    j: int
    T_j: float
    mu_j: float
    control_norm: float
    mid_low_residual: float
    end_norm: float


def _low_mode_control(lin: LinearControlProblem, W: np.ndarray, z0: np.ndarray,
                      rcond: float) -> Tuple[np.ndarray, dict]:
    """Minimal-norm control with ``W z(T) = 0`` and zero control at both ends."""
    nt, m = lin.nt, lin.m
    R = lin.reachability_matrix(W)
    target = -(W @ lin.free_terminal(z0))
    inner = np.zeros((nt + 1, m), dtype=bool)
    inner[1:nt] = True
    cols = inner.ravel()
    sq = np.sqrt(lin.qdiag[cols])
    v, _, rank, sv = sla.lstsq(R[:, cols] / sq, target, cond=rcond, lapack_driver="gelsd")
    u = np.zeros((nt + 1) * m)
    u[cols] = v / sq
    return u.reshape(nt + 1, m), {"rank": int(rank), "rows": W.shape[0]}


def lr_synthesize(z0, grid_nx: int, domain: DomainConfig, region: ControlRegion,
                  beta: float = 1.0, J: Optional[int] = None, q: int = 2,
                  tol: float = 1e-4, rcond: float = 1e-14) -> ControlSolution:
    """Dyadic low-mode control and free dissipation, pasted into one control.

    On ``(tau_{j-1}, tau_j)`` the first half drives ``project_low(z, mu_j)`` to
    zero with the minimal-norm control of the full discrete system; the second
    half is uncontrolled.  After the last interval the system runs free until
    ``T``.  With ``J=None`` the depth is increased from 1 until the final norm
    is below ``tol`` (at most 12).
    """
    if domain.sigma <= 0:
        raise InvalidInputError("dyadic synthesis relies on the spectral gap: sigma must be > 0")
    if region.kind != "rectangle":
        raise InvalidInputError("dyadic synthesis uses a rectangular control region")
    if J is None:
        last = None
        for depth in range(1, 13):
            last = lr_synthesize(z0, grid_nx, domain, region, beta, depth, q, tol, rcond)
            if last.extras["final_relative"] <= tol:
                return last
        raise SolverError("depth 12 insufficient", final=last.extras["final_relative"])

    sched = DyadicSchedule(domain.horizon, beta, J, q)
    grid = GridSpec.from_domain(domain, grid_nx, sched.nt)
    A = assemble_system(grid, domain)
    B = assemble_control_injection(grid, region)
    z = z0.flat() if isinstance(z0, State) else np.asarray(z0, float)
    sigma, dx = domain.sigma, grid.dx
    z0n = state_norm(State.from_flat(z, grid), sigma, dx)
    m = B.ncols
    u_all = np.zeros((sched.nt + 1, m))
    if z0n == 0:
        return ControlSolution(ControlField(u_all, B.meta["nodes"]), 0.0, 0.0, 0.0, "lr",
                               extras={"records": [], "final_relative": 0.0,
                                       "schedule": sched, "recorded": {}, "cell": dx**2})
    prop = CNPropagator(A.matrix, sched.dt, B.matrix)
    recorded = {0: z.copy()}
    records: List[IntervalRecord] = []
    starts = sched.starts()
    for j, (Tj, mu) in enumerate(zip(sched.lengths(), sched.thresholds()), start=1):
        s = sched.half_steps(j)
        k0 = starts[j - 1]
        lin = LinearControlProblem(A.matrix, B.matrix, sched.dt, s, dx**2)
        lin.prop = prop
        W = low_mode_basis(grid, mu)
        u, _ = _low_mode_control(lin, W, z, rcond)
        u_all[k0:k0 + s + 1] = u
        states = prop.run(z, s, u)
        zmid = states[-1]
        recorded[k0 + s] = zmid.copy()
        low = state_norm(project_low(State.from_flat(zmid, grid), mu), sigma, dx) / z0n
        z = prop.run(zmid, s)[-1]
        recorded[k0 + 2 * s] = z.copy()
        records.append(IntervalRecord(j, Tj, mu, control_norm(u, sched.dt, dx**2), low,
                                      state_norm(State.from_flat(z, grid), sigma, dx) / z0n))
    z = prop.run(z, sched.nt - starts[-1])[-1]
    recorded[sched.nt] = z.copy()
    final = State.from_flat(z, grid)
    ny, nh = h_norm(final, sigma, dx)
    return ControlSolution(
        ControlField(u_all, B.meta["nodes"]), control_norm(u_all, sched.dt, dx**2), ny, nh, "lr",
        iterations=J, residual=max(r.mid_low_residual for r in records),
        extras={"records": records, "final_relative": math.hypot(ny, nh) / z0n,
                "schedule": sched, "recorded": recorded, "grid": grid, "cell": dx**2,
                "A": A, "B": B})


def replay_defect(sol: ControlSolution, domain: DomainConfig) -> float:
    """Largest relative gap between recorded synthesis states and one monolithic run."""
    grid, A, B = sol.extras["grid"], sol.extras["A"], sol.extras["B"]
    prop = CNPropagator(A.matrix, grid.dt, B.matrix)
    rec = sol.extras["recorded"]
    states = prop.run(rec[0], grid.nt, sol.control.u)
    scale = np.linalg.norm(rec[0])
    return max(float(np.linalg.norm(states[k] - v) / scale) for k, v in rec.items())


def eventually_decreasing(values, tail: int = 3) -> bool:
    """The last ``tail`` values are non-increasing and the last is below the peak."""
    v = list(values)[-tail:]
    return all(b <= a for a, b in zip(v, v[1:])) and v[-1] < max(values)


def write_synthesis_report(sol: ControlSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["# schema synthesis v1"])
        w.writerow(["j", "T_j", "mu_j", "interval_control_norm", "interval_end_state_norm"])
        for r in sol.extras["records"]:
            w.writerow([r.j, repr(r.T_j), repr(r.mu_j), repr(r.control_norm), repr(r.end_norm)])
