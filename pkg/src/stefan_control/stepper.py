"""Crank-Nicolson integration of the assembled system and its transpose."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import DomainConfig, GridSpec, InvalidInputError, State, discrete_energy, h_norm

RESIDUAL_TOL = 1e-12


class FactorizationError(RuntimeError):
    pass


def _as_csr(op) -> sp.csr_matrix:
    return op.matrix if hasattr(op, "matrix") else sp.csr_matrix(op)


class CNPropagator:
    """Cached factorization of ``I - dt/2 A`` with forward and transposed steps.

    Every solve is checked against the relative residual bound and refined
    once if needed; if the direct factorization is unavailable a GMRES
    fallback is used instead.
    """

    def __init__(self, A, dt: float, B=None):
        if not dt > 0:
            raise InvalidInputError("dt must be > 0")
        self.A = _as_csr(A)
        self.B = None if B is None else _as_csr(B)
        self.dt = dt
        n = self.A.shape[0]
        eye = sp.identity(n, format="csr")
        self.P = (eye - 0.5 * dt * self.A).tocsc()
        self.Qp = (eye + 0.5 * dt * self.A).tocsr()
        self.PT = self.P.T.tocsr()
        self.QpT = self.Qp.T.tocsr()
        try:
            self.lu = spla.splu(self.P)
        except RuntimeError as exc:  # exactly singular
            warnings.warn(f"direct factorization failed ({exc}); using GMRES")
            self.lu = None
        self.max_residual = 0.0

    def _solve(self, rhs: np.ndarray, trans: bool) -> np.ndarray:
        mat = self.PT if trans else self.P
        if self.lu is not None:
            x = self.lu.solve(rhs, trans="T" if trans else "N")
        else:
            x, info = spla.gmres(mat, rhs, rtol=RESIDUAL_TOL / 10, atol=0.0, restart=200,
                                 maxiter=1000)
            if info != 0:
                raise FactorizationError(f"GMRES fallback did not converge (info={info})")
        scale = np.linalg.norm(rhs)
        if scale == 0:
            return np.zeros_like(rhs)
        res = np.linalg.norm(rhs - mat @ x) / scale
        if res > RESIDUAL_TOL and self.lu is not None:
            x = x + self.lu.solve(rhs - mat @ x, trans="T" if trans else "N")
            res = np.linalg.norm(rhs - mat @ x) / scale
        if res > RESIDUAL_TOL:
            raise FactorizationError(f"implicit solve residual {res:.3e} exceeds {RESIDUAL_TOL}")
        self.max_residual = max(self.max_residual, res)
        return x

    def step(self, z: np.ndarray, u_k=None, u_k1=None) -> np.ndarray:
        rhs = self.Qp @ z
        if self.B is not None and u_k is not None:
            rhs = rhs + 0.5 * self.dt * (self.B @ (u_k + u_k1))
        return self._solve(rhs, trans=False)

    def adjoint_step(self, zeta: np.ndarray) -> np.ndarray:
        """``zeta^k = (I + dt/2 A^T)(I - dt/2 A^T)^{-1} zeta^{k+1}``."""
        return self.QpT @ self._solve(zeta, trans=True)

    def run(self, z0: np.ndarray, nt: int, u: Optional[np.ndarray] = None) -> np.ndarray:
        out = np.empty((nt + 1, z0.size))
        out[0] = z0
        for k in range(nt):
            out[k + 1] = self.step(out[k], None if u is None else u[k],
                                   None if u is None else u[k + 1])
        return out

    def run_adjoint(self, zeta_T: np.ndarray, nt: int) -> np.ndarray:
        """Backward sweep; row ``k`` of the result is ``zeta^k``."""
        out = np.empty((nt + 1, zeta_T.size))
        out[nt] = zeta_T
        for k in range(nt - 1, -1, -1):
            out[k] = self.adjoint_step(out[k + 1])
        return out

    def observe(self, zeta: np.ndarray) -> np.ndarray:
        """Adjoint observation ``g^k = dt/2 B^T (zbar_{k-1} + zbar_k)``.

        ``zbar_k = (zeta^k + zeta^{k+1})/2``.  This is the map ``L^T`` dual to
        ``u -> z(T)`` from zero data: ``<L u, zeta_T> = sum_k <u^k, g^k>``.
        """
        bar = 0.5 * (zeta[:-1] + zeta[1:])
        acc = np.zeros_like(zeta)
        acc[:-1] += bar
        acc[1:] += bar
        return 0.5 * self.dt * (self.B.T @ acc.T).T


@dataclass
class Trajectory:
    """Flat snapshots (``states[k]`` at ``times[k]``) and their energies."""

    times: np.ndarray
    states: np.ndarray
    energies: np.ndarray
    grid: Optional[GridSpec] = None
    sigma: float = 0.0
    meta: dict = field(default_factory=dict)

    def state(self, k: int) -> State:
        return State.from_flat(self.states[k], self.grid)

    def component_norms(self):
        """Per-snapshot ``(||y||, ||h||)`` in the discrete weighted norm."""
        return np.array([h_norm(self.state(k), self.sigma, self.grid.dx)
                         for k in range(len(self.times))])

    def to_csv(self, path) -> None:
        norms = self.component_norms()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["# schema trajectory v1"])
            w.writerow(["t", "energy", "y_norm", "h_norm"])
            for t, e, (ny, nh) in zip(self.times, self.energies, norms):
                w.writerow([repr(float(t)), repr(float(e)), repr(float(ny)), repr(float(nh))])


def cn_step(A, B, z_k, u_k, u_k1, dt, propagator: Optional[CNPropagator] = None) -> np.ndarray:
    """One Crank-Nicolson step.  Pass ``propagator`` to reuse its factorization."""
    prop = propagator or CNPropagator(A, dt, B)
    return prop.step(np.asarray(z_k, float),
                     None if u_k is None else np.asarray(u_k, float),
                     None if u_k1 is None else np.asarray(u_k1, float))


def _initial_flat(z0, grid: GridSpec) -> np.ndarray:
    if isinstance(z0, State):
        z0.check(grid)
        return z0.flat()
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (grid.size,):
        raise InvalidInputError(f"initial state has size {z0.shape}, expected {grid.size}")
    return z0


def simulate(A, B, z0, u, grid: GridSpec, domain: DomainConfig,
             propagator: Optional[CNPropagator] = None) -> Trajectory:
    """Forward run over ``nt`` steps; ``u`` may be ``None`` for free dynamics."""
    z = _initial_flat(z0, grid)
    uu = None
    if u is not None:
        uu = u.u if hasattr(u, "u") else np.asarray(u, float)
        if B is None or uu.shape != (grid.nt + 1, _as_csr(B).shape[1]):
            raise InvalidInputError(f"control has shape {uu.shape}, "
                                    f"expected {(grid.nt + 1, None if B is None else _as_csr(B).shape[1])}")
    prop = propagator or CNPropagator(A, grid.dt, B)
    states = prop.run(z, grid.nt, uu)
    energies = np.array([discrete_energy(State.from_flat(s, grid), domain.sigma, grid.dx)
                         for s in states])
    return Trajectory(grid.times, states, energies, grid, domain.sigma,
                      {"max_residual": prop.max_residual})


def simulate_adjoint(A, zeta_T, grid: GridSpec, propagator: Optional[CNPropagator] = None,
                     B=None) -> Trajectory:
    """Backward transpose run; ``states[k]`` is ``zeta^k``."""
    zT = np.asarray(zeta_T, dtype=float)
    if zT.shape != (grid.size,) and zT.ndim != 1:
        raise InvalidInputError("terminal adjoint datum must be a flat vector")
    prop = propagator or CNPropagator(A, grid.dt, B)
    states = prop.run_adjoint(zT, grid.nt)
    energies = np.einsum("ij,ij->i", states, states)
    return Trajectory(grid.times, states, energies, grid, 0.0,
                      {"max_residual": prop.max_residual, "direction": "backward"})


def duality_gap(prop: CNPropagator, z0, u, zeta_T, nt: int) -> float:
    """Relative defect of the discrete duality identity."""
    zs = prop.run(z0, nt, u)
    zeta = prop.run_adjoint(zeta_T, nt)
    lhs = zs[-1] @ zeta_T - z0 @ zeta[0]
    rhs = float(np.sum(u * prop.observe(zeta)))
    scale = max(abs(zs[-1] @ zeta_T), abs(z0 @ zeta[0]), abs(rhs), math.ulp(1.0))
    return abs(lhs - rhs) / scale
