"""Minimal-norm null controls, per-mode moment controls and observability costs.

Discrete control norm: ``||u||^2 = sum_k w_k dt sum_nodes dxw u_k^2`` with
trapezoid weights ``w_0 = w_nt = 1/2`` and ``dxw`` the cell area (``dx^2`` in
2D, ``dx`` for mode systems).  With ``L`` the map ``u -> z(T)`` from zero data,
the minimal-norm control is ``u = Q^{-1} L^T p`` for a multiplier ``p``.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import assemble_control_injection, assemble_mode_operator, assemble_system
from .model import (ControlField, DomainConfig, GridSpec, InvalidInputError, State,
                    h_norm, state_norm)
from .spectral import EigenPair, Spectrum, eigenfunction, spectrum
from .stepper import CNPropagator, Trajectory, simulate


class SolverError(RuntimeError):
    """Solver failure; ``diagnostics`` holds the relevant numbers."""

    def __init__(self, msg: str, **diagnostics):
        super().__init__(msg)
        self.diagnostics = diagnostics


@dataclass
class ControlSolution:
    control: ControlField
    control_norm: float
    terminal_y_norm: float
    terminal_h_norm: float
    backend: str
    iterations: int = 0
    residual: float = 0.0
    extras: Dict[str, object] = field(default_factory=dict)

    def norm_series(self) -> np.ndarray:
        """``||u(t_k)||_{L^2(omega)}`` per time level."""
        w = self.extras.get("cell", 1.0)
        return np.sqrt(w * np.sum(self.control.u**2, axis=1))


@dataclass
class CostEstimate:
    n: float
    T: float
    sigma: float
    window: Tuple[float, float]
    K_est: float
    basis_size: int


# ---------------------------------------------------------------- weights


def trapezoid_weights(nt: int) -> np.ndarray:
    w = np.ones(nt + 1)
    w[0] = w[-1] = 0.5
    return w


def control_metric(nt: int, m: int, dt: float, cell: float) -> np.ndarray:
    """Diagonal of ``Q`` for a ``(nt+1, m)`` control array, flattened row-major."""
    return np.repeat(trapezoid_weights(nt) * dt * cell, m)


def control_norm(u: np.ndarray, dt: float, cell: float) -> float:
    nt = u.shape[0] - 1
    return math.sqrt(float(np.sum(control_metric(nt, u.shape[1], dt, cell) * u.ravel() ** 2)))


# ---------------------------------------------------------------- generic solvers


@dataclass
class LinearControlProblem:
    """Discrete system ``z' = A z + B u`` on a uniform time grid."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    dt: float
    nt: int
    cell: float

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A)
        self.B = sp.csr_matrix(self.B)
        self.prop = CNPropagator(self.A, self.dt, self.B)
        self.qdiag = control_metric(self.nt, self.B.shape[1], self.dt, self.cell)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def free_terminal(self, z0: np.ndarray) -> np.ndarray:
        z = z0
        for _ in range(self.nt):
            z = self.prop.step(z)
        return z

    def terminal(self, z0: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.prop.run(z0, self.nt, u)[-1]

    def adjoint_observation(self, zeta_T: np.ndarray) -> np.ndarray:
        """``L^T zeta_T`` as a ``(nt+1, m)`` array."""
        return self.prop.observe(self.prop.run_adjoint(zeta_T, self.nt))

    def reach(self, u: np.ndarray) -> np.ndarray:
        """``L u``: terminal state from zero data."""
        return self.terminal(np.zeros(self.n), u)

    def gramian_apply(self, p: np.ndarray) -> np.ndarray:
        """HUM operator ``L Q^{-1} L^T p``."""
        g = self.adjoint_observation(p).ravel() / self.qdiag
        return self.reach(g.reshape(self.nt + 1, self.m))

    def reachability_matrix(self, rows: Optional[np.ndarray] = None) -> np.ndarray:
        """Dense ``W L`` for the row functionals ``W`` (default: identity).

        One adjoint sweep per row of ``W``.
        """
        W = np.eye(self.n) if rows is None else np.atleast_2d(rows)
        out = np.empty((W.shape[0], (self.nt + 1) * self.m))
        for r in range(W.shape[0]):
            out[r] = self.adjoint_observation(W[r]).ravel()
        return out


def solve_kkt(prob: LinearControlProblem, z0: np.ndarray,
              permc_spec: str = "NATURAL") -> Tuple[np.ndarray, dict]:
    """Minimal-norm null control by one sparse solve of the full KKT system.

    Unknowns are interleaved per time level (``u^k``, multiplier of step ``k``,
    ``z^k``) so the saddle-point matrix is block banded in time; with this
    ordering no fill-reducing permutation is needed.
    """
    N, m, nt, dt = prob.n, prob.m, prob.nt, prob.dt
    P = prob.prop.P.tocsr()
    Qp = prob.prop.Qp
    Bh = (0.5 * dt * prob.B).tocsr()
    off_u = np.empty(nt + 1, dtype=int)
    off_l = np.zeros(nt + 1, dtype=int)
    off_z = np.zeros(nt + 1, dtype=int)
    pos = 0
    for k in range(nt + 1):
        off_u[k] = pos
        pos += m
        if k >= 1:
            off_l[k] = pos
            pos += N
            if k <= nt - 1:
                off_z[k] = pos
                pos += N
    size = pos
    rows: List[np.ndarray] = []
    cols: List[np.ndarray] = []
    vals: List[np.ndarray] = []

    def put(r0, c0, M, symmetric=True):
        M = M.tocoo()
        rows.append(M.row + r0)
        cols.append(M.col + c0)
        vals.append(M.data)
        if symmetric:
            rows.append(M.col + c0)
            cols.append(M.row + r0)
            vals.append(M.data)

    qd = prob.qdiag.reshape(nt + 1, m)
    for k in range(nt + 1):
        put(off_u[k], off_u[k], sp.diags(qd[k]), symmetric=False)
    rhs = np.zeros(size)
    for k in range(1, nt + 1):
        r = off_l[k]
        if k <= nt - 1:
            put(r, off_z[k], P)
        if k >= 2:
            put(r, off_z[k - 1], -Qp)
        put(r, off_u[k - 1], -Bh)
        put(r, off_u[k], -Bh)
    rhs[off_l[1]:off_l[1] + N] = Qp @ z0
    K = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(size, size))
    t0 = time.perf_counter()
    try:
        lu = spla.splu(K, permc_spec=permc_spec)
    except RuntimeError as exc:
        raise SolverError(f"KKT factorization failed: {exc}", size=size) from exc
    x = lu.solve(rhs)
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    for _ in range(3):
        r = rhs - K @ x
        if np.linalg.norm(r) <= 1e-15 * scale:
            break
        x = x + lu.solve(r)
    res = float(np.linalg.norm(rhs - K @ x) / scale)
    u = np.stack([x[off_u[k]:off_u[k] + m] for k in range(nt + 1)])
    lam_last = x[off_l[nt]:off_l[nt] + N]
    info = {"kkt_size": size, "lu_nnz": int(lu.L.nnz + lu.U.nnz), "kkt_residual": res,
            "factor_seconds": time.perf_counter() - t0,
            # adjoint terminal datum whose observation reproduces Q u
            "zeta_T": P.T @ lam_last}
    return u, info


def stationarity_residual(prob: LinearControlProblem, u: np.ndarray, zeta_T: np.ndarray) -> float:
    """``||Q u - L^T zeta_T|| / ||Q u||``: is ``u`` in the range of the adjoint observation?"""
    qu = prob.qdiag * u.ravel()
    g = prob.adjoint_observation(zeta_T).ravel()
    s = np.linalg.norm(qu)
    return 0.0 if s == 0 else float(np.linalg.norm(qu - g) / s)


def conjugate_gradient(apply, b: np.ndarray, x0: Optional[np.ndarray] = None,
                       rtol: float = 1e-13, maxiter: Optional[int] = None):
    """CG with full re-conjugation of the search directions.

    Each new direction is made conjugate to all previous ones (two passes of
    Gram-Schmidt in the operator inner product), so the iteration behaves as
    in exact arithmetic and terminates after at most ``len(b)`` steps even
    when the operator has condition number near ``1/eps``.  Returns
    ``(x, iterations, relative residual)``.
    """
    n = b.size
    maxiter = maxiter or 2 * n + 10
    x = np.zeros(n) if x0 is None else np.array(x0, float)
    bn = np.linalg.norm(b)
    if bn == 0:
        return np.zeros(n), 0, 0.0
    r = b - apply(x)
    dirs: List[np.ndarray] = []
    adirs: List[np.ndarray] = []
    curv: List[float] = []
    it = 0
    while it < maxiter and np.linalg.norm(r) > rtol * bn:
        p = r.copy()
        for _ in range(2):
            for d, ad, c in zip(dirs, adirs, curv):
                p -= (ad @ p) / c * d
        ap = apply(p)
        c = float(p @ ap)
        if not c > 0:
            break
        alpha = float(p @ r) / c
        x += alpha * p
        r -= alpha * ap
        dirs.append(p)
        adirs.append(ap)
        curv.append(c)
        it += 1
        if it % 25 == 0 or len(dirs) >= n:
            r = b - apply(x)
        if len(dirs) >= n:
            # Krylov space exhausted: restart from the true residual
            dirs.clear()
            adirs.clear()
            curv.clear()
    res = float(np.linalg.norm(b - apply(x)) / bn)
    return x, it, res


def solve_penalized_cg(prob: LinearControlProblem, z0: np.ndarray, eps: float,
                       p0: Optional[np.ndarray] = None, rtol: float = 1e-13,
                       maxiter: Optional[int] = None, b: Optional[np.ndarray] = None):
    """Minimize ``||u||^2 + ||z(T)||^2/eps`` via CG on ``(G + eps I) p = -M^nt z0``.

    Returns ``(u, p, iterations, relative residual)``; ``z(T) = -eps p``.
    """
    b = prob.free_terminal(z0) if b is None else b
    p, its, res = conjugate_gradient(lambda v: prob.gramian_apply(v) + eps * v, -b,
                                     x0=p0, rtol=rtol, maxiter=maxiter)
    if res > 1e-6:
        raise SolverError("CG did not converge", iterations=its, residual=res, eps=eps)
    u = (prob.adjoint_observation(p).ravel() / prob.qdiag).reshape(prob.nt + 1, prob.m)
    return u, p, its, res


def gramian_norm_estimate(prob: LinearControlProblem, iters: int = 20, seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(prob.n)
    lam = 0.0
    for _ in range(iters):
        v /= np.linalg.norm(v)
        w = prob.gramian_apply(v)
        lam = float(v @ w)
        v = w
    return lam


# ---------------------------------------------------------------- 2D problem


@dataclass
class FullProblem:
    """Assembled 2D system plus the control problem built on it."""

    grid: GridSpec
    domain: DomainConfig
    A: object
    B: object
    lin: LinearControlProblem

    @classmethod
    def build(cls, grid: GridSpec, domain: DomainConfig, region) -> "FullProblem":
        A = assemble_system(grid, domain)
        B = assemble_control_injection(grid, region)
        lin = LinearControlProblem(A.matrix, B.matrix, grid.dt, grid.nt, grid.dx**2)
        return cls(grid, domain, A, B, lin)

    def norm(self, z: np.ndarray) -> float:
        return state_norm(State.from_flat(z, self.grid), self.domain.sigma, self.grid.dx)

    def terminal_norms(self, zT: np.ndarray) -> Tuple[float, float]:
        return h_norm(State.from_flat(zT, self.grid), self.domain.sigma, self.grid.dx)


def _as_flat(z0, grid) -> np.ndarray:
    if isinstance(z0, State):
        z0.check(grid)
        return z0.flat()
    return np.asarray(z0, dtype=float)


def _finish(problem: FullProblem, z0: np.ndarray, u: np.ndarray, backend: str,
            iterations: int, residual: float, extras: dict) -> ControlSolution:
    traj = simulate(problem.A, problem.B, z0, u, problem.grid, problem.domain,
                    propagator=problem.lin.prop)
    ny, nh = problem.terminal_norms(traj.states[-1])
    z0n = problem.norm(z0)
    extras = dict(extras, trajectory=traj, z0_norm=z0n, cell=problem.grid.dx**2,
                  nodes=problem.B.meta["nodes"])
    return ControlSolution(ControlField(u, problem.B.meta["nodes"]),
                           control_norm(u, problem.grid.dt, problem.grid.dx**2),
                           ny, nh, backend, iterations, residual, extras)


def solve_minimal_norm_control(z0, config, backend: Optional[str] = None,
                               problem: Optional[FullProblem] = None,
                               eps_schedule: Optional[Sequence[float]] = None,
                               norm_rtol: float = 1e-6) -> ControlSolution:
    """Minimal-norm control steering ``z0`` to zero at ``T``.

    ``kkt`` solves the equality-constrained program exactly; ``gramian_cg``
    decreases the penalty ``eps`` by factors of 10 (or along ``eps_schedule``)
    until ``||z(T)|| <= tol ||z0||`` and the control norm changes by at most
    ``norm_rtol`` between sweeps, warm-starting CG each time.
    """
    backend = backend or config.backend
    problem = problem or FullProblem.build(config.grid, config.domain, config.region)
    z0 = _as_flat(z0, problem.grid)
    nt, m = problem.grid.nt, problem.lin.m
    if not np.any(z0):
        return _finish(problem, z0, np.zeros((nt + 1, m)), backend, 0, 0.0, {})
    if backend == "kkt":
        u, info = solve_kkt(problem.lin, z0)
        info["stationarity"] = stationarity_residual(problem.lin, u, info.pop("zeta_T"))
        sol = _finish(problem, z0, u, "kkt", 1, info["kkt_residual"], info)
    elif backend == "gramian_cg":
        lin = problem.lin
        b = lin.free_terminal(z0)
        z0n = problem.norm(z0)
        scale = gramian_norm_estimate(lin)
        schedule = list(eps_schedule) if eps_schedule else [scale * 10.0 ** (-3 - i)
                                                             for i in range(16)]
        p = None
        total = 0
        history = []
        for eps in schedule:
            u, p, its, res = solve_penalized_cg(lin, z0, eps, p0=p, b=b,
                                                maxiter=min(config.cg_maxiter, 3 * lin.n))
            total += its
            term = problem.norm(-eps * p)
            unorm = control_norm(u, lin.dt, lin.cell)
            settled = bool(history) and abs(unorm - history[-1][1]) <= norm_rtol * unorm
            history.append((eps, unorm, term))
            if eps_schedule is None and term <= config.tol * z0n and settled:
                break
        sol = _finish(problem, z0, u, "gramian_cg", total, res,
                      {"eps": eps, "eps_history": history})
    else:
        raise InvalidInputError(f"unknown backend {backend!r}")
    rel = math.hypot(sol.terminal_y_norm, sol.terminal_h_norm) / sol.extras["z0_norm"]
    sol.extras["terminal_relative"] = rel
    if eps_schedule is None and rel > max(config.tol, 1e-14) * 10:
        raise SolverError(f"{backend} terminal norm {rel:.3e} above tolerance", terminal=rel)
    return sol


def backend_agreement(z0, config, problem: Optional[FullProblem] = None) -> float:
    """``|norm_kkt - norm_cg| / norm_kkt``; 0 for zero data."""
    problem = problem or FullProblem.build(config.grid, config.domain, config.region)
    a = solve_minimal_norm_control(z0, config, "kkt", problem)
    b = solve_minimal_norm_control(z0, config, "gramian_cg", problem)
    if a.control_norm == 0:
        return abs(b.control_norm)
    return abs(a.control_norm - b.control_norm) / a.control_norm


# ---------------------------------------------------------------- mode-wise (eigenbasis)


def time_integral(s: np.ndarray, T: float) -> np.ndarray:
    """``int_0^T e^{s t} dt`` with a series for tiny ``|s| T``."""
    s = np.asarray(s, dtype=float)
    x = s * T
    small = np.abs(x) < 1e-6
    out = np.empty_like(x)
    out[~small] = np.expm1(x[~small]) / s[~small]
    xs = x[small]
    out[small] = T * (1 + xs / 2 + xs * xs / 6)
    return out


def _gauss(c: float, d: float, npts: int = 256):
    xg, wg = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (d - c) * xg + 0.5 * (c + d), 0.5 * (d - c) * wg


def window_gram(pairs: Sequence[EigenPair], c: float, d: float) -> np.ndarray:
    """``<phi_k, phi_l>_{L^2(c, d)}`` by Gauss-Legendre quadrature."""
    x, w = _gauss(c, d)
    phi = np.array([eigenfunction(p, x)[0] for p in pairs])
    return (phi * w) @ phi.T


def observability_gramian(spec: Spectrum, T: float, c: float, d: float) -> np.ndarray:
    lam = spec.eigenvalues
    s = lam[:, None] + lam[None, :]
    return time_integral(s, T) * window_gram(spec.pairs, c, d)


def default_truncation(n, sigma, T, cap: int = 64) -> int:
    """Smallest ``K`` with ``exp(2 lambda_K T) < 1e-16``, capped."""
    spec = spectrum(n, sigma, cap)
    for k, lam in enumerate(spec.eigenvalues):
        if math.exp(2 * lam * T) < 1e-16:
            return max(k, 1)
    return cap


def modal_coefficients(spec: Spectrum, y: np.ndarray, h: float) -> np.ndarray:
    """``<(y, h), Phi_k>`` for ``y`` sampled on the interior nodes of ``(-1, 1)``.

    Trapezoid rule including the boundary values ``y(-1) = 0`` and
    ``y(1) = -sigma n^2 h``.
    """
    m = y.size
    x = -1 + np.arange(0, m + 2) * (2.0 / (m + 1))
    sn2 = spec.sigma * float(spec.n) ** 2
    yy = np.concatenate([[0.0], y, [-sn2 * h]])
    coeffs = []
    for p in spec.pairs:
        phi, ph = eigenfunction(p, x)
        coeffs.append(np.trapezoid(yy * phi, x) + sn2 * h * ph)
    return np.array(coeffs)


@dataclass
class ModeControl:
    """Control ``u(t, x2) = sum_k a_k e^{lambda_k (T - t)} phi_k(x2)`` on ``(c, d)``."""

    spec: Spectrum
    a: np.ndarray
    T: float
    window: Tuple[float, float]

    def __call__(self, t, x2) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, float))
        x2 = np.atleast_1d(np.asarray(x2, float))
        c, d = self.window
        phi = np.array([eigenfunction(p, x2)[0] for p in self.spec.pairs])
        mask = (x2 >= c) & (x2 <= d)
        e = np.exp(np.outer(self.T - t, self.spec.eigenvalues))
        return (e * self.a) @ phi * mask


def per_frequency_control(n, datum, T: float, window, sigma: float,
                          K: Optional[int] = None, coefficients: Optional[np.ndarray] = None,
                          nt: int = 200, tol: float = 1e-8) -> ControlSolution:
    """Moment-method null control of mode ``n`` with control on ``window``.

    ``datum`` is ``(y_samples, h)``; alternatively pass the eigen-coefficients.
    """
    c, d = window
    if not -1 < c < d < 1:
        raise InvalidInputError(f"invalid window {window}")
    K = K or default_truncation(n, sigma, T)
    spec = spectrum(n, sigma, K)
    if coefficients is None:
        y, h = datum
        coefficients = modal_coefficients(spec, np.asarray(y, float), float(h))
    c0 = np.asarray(coefficients, float)[:K]
    decay = np.exp(spec.eigenvalues * T)
    G = observability_gramian(spec, T, c, d)
    rhs = -decay * c0
    cond = float(np.linalg.cond(G))
    if not np.any(c0):
        a = np.zeros(K)
    else:
        if cond * np.finfo(float).eps > 1e-2:
            raise SolverError("observability Gramian is singular to working precision",
                              condition=cond)
        a = sla.solve(G, rhs, assume_a="pos")
        a += sla.solve(G, rhs - G @ a, assume_a="pos")
    terminal = decay * c0 + G @ a
    ref = max(np.linalg.norm(c0), 1.0)
    res = float(np.linalg.norm(terminal) / ref)
    ctrl = ModeControl(spec, a, T, (c, d))
    x_nodes = np.linspace(c, d, 33)
    times = np.linspace(0, T, nt + 1)
    u = ctrl(times, x_nodes)
    sol = ControlSolution(ControlField(u), math.sqrt(max(float(a @ G @ a), 0.0)),
                          float(np.linalg.norm(terminal)), 0.0, "moments", 1, res,
                          {"coefficients": a, "terminal_coefficients": terminal,
                           "condition": cond, "spectrum": spec, "mode_control": ctrl,
                           "times": times, "x2": x_nodes, "cell": x_nodes[1] - x_nodes[0]})
    if res > tol:
        raise SolverError(f"terminal eigencoefficients {res:.3e} exceed {tol}",
                          residual=res, condition=cond)
    return sol


def observability_cost(n, T: float, sigma: float, window, K: int) -> CostEstimate:
    """Truncated observability constant ``max ||zeta(0)||^2 / int_0^T ||zeta||^2_omega``.

    With adjoint data ``sum b_k Phi_k`` this is the top generalized eigenvalue
    of ``(E, G)`` with ``E = diag(e^{2 lambda_k T})``.
    """
    if K < 4:
        raise InvalidInputError("K must be >= 4")
    c, d = window
    spec = spectrum(n, sigma, K)
    G = observability_gramian(spec, T, c, d)
    try:
        Lc = np.linalg.cholesky(G)
    except np.linalg.LinAlgError as exc:
        raise SolverError("observability Gramian not positive definite",
                          condition=float(np.linalg.cond(G))) from exc
    R = sla.solve_triangular(Lc, np.diag(np.exp(spec.eigenvalues * T)), lower=True)
    k_est = float(np.linalg.norm(R, 2) ** 2)
    if not np.isfinite(k_est):
        raise SolverError("Gramian condition overflow")
    return CostEstimate(n, T, sigma, (c, d), k_est, K)


@dataclass
class CostFit:
    a: float
    b: float
    r2: float

    @property
    def M(self) -> float:
        """Single constant with ``K <= M e^{M/T}`` in the fitted form."""
        return max(math.exp(self.a), self.b)


def fit_cost(T: Sequence[float], K_est: Sequence[float]) -> CostFit:
    """Least-squares fit ``log K ~ a + b/T`` with coefficient of determination."""
    T = np.asarray(T, float)
    y = np.log(np.asarray(K_est, float))
    X = np.column_stack([np.ones_like(T), 1.0 / T])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    pred = X @ coef
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return CostFit(float(coef[0]), float(coef[1]), r2)


def cost_table(n, sigma, window, K, T_grid) -> List[CostEstimate]:
    return [observability_cost(n, T, sigma, window, K) for T in T_grid]


# ---------------------------------------------------------------- zeroth mode


def min_norm_least_squares(prob: LinearControlProblem, z0: np.ndarray,
                           rcond: float = 1e-13) -> Tuple[np.ndarray, dict]:
    """Minimal-norm control through the dense reachability matrix.

    Solves ``L Q^{-1/2} v = -M^nt z0`` by truncated SVD; suited to small state
    dimension where the KKT band is wide relative to the state.
    """
    Lm = prob.reachability_matrix()
    target = -prob.free_terminal(z0)
    sq = np.sqrt(prob.qdiag)
    v, _, rank, sv = sla.lstsq(Lm / sq, target, cond=rcond, lapack_driver="gelsd")
    u = (v / sq).reshape(prob.nt + 1, prob.m)
    return u, {"rank": int(rank), "singular_max": float(sv[0]), "singular_min": float(sv[-1])}


def window_nodes(m: int, c: float, d: float) -> np.ndarray:
    x = -1 + np.arange(1, m + 1) * (2.0 / (m + 1))
    return np.flatnonzero((x >= c - 1e-12) & (x <= d + 1e-12))


def mode_injection(m: int, c: float, d: float) -> sp.csr_matrix:
    idx = window_nodes(m, c, d)
    if idx.size == 0:
        raise InvalidInputError(f"window ({c}, {d}) has no node at m={m}")
    return sp.csr_matrix((np.ones(idx.size), (idx, np.arange(idx.size))), shape=(m + 1, idx.size))


def zeroth_mode_control(datum, T: float, window, m: int, nt: int) -> ControlSolution:
    """Null control of the horizontally averaged system.

    The mean temperature solves the Dirichlet heat equation; the mean height
    integrates its Neumann trace, adding one scalar terminal constraint.
    """
    c, d = window
    flags = []
    if abs(c + d) < 1e-14 or abs(c - d) < 1e-14:
        flags.append("window violates c != +-d: the height constraint may be unreachable")
    y0, h0 = datum
    z0 = np.concatenate([np.asarray(y0, float), [float(h0)]])
    if z0.size != m + 1:
        raise InvalidInputError(f"datum has {z0.size - 1} nodes, expected {m}")
    op, _ = assemble_mode_operator(0, DomainConfig(sigma=0.0, horizon=T), m)
    dz = 2.0 / (m + 1)
    B = mode_injection(m, c, d)
    prob = LinearControlProblem(op.matrix, B, T / nt, nt, dz)
    if not np.any(z0):
        u, info = np.zeros((nt + 1, B.shape[1])), {}
    else:
        u, info = min_norm_least_squares(prob, z0)
    zT = prob.terminal(z0, u)
    ny = math.sqrt(dz * float(zT[:m] @ zT[:m]))
    nh = abs(float(zT[m]))
    res = math.hypot(ny, nh)
    return ControlSolution(ControlField(u, window_nodes(m, c, d)), control_norm(u, prob.dt, dz),
                           ny, nh, "zeroth_mode", 1, res,
                           dict(info, flags=flags, problem=prob, cell=dz))


# ---------------------------------------------------------------- series lemma


def series_terms(c: float, d: float, N: int) -> np.ndarray:
    """``dphi_j(1) lambda_j^{-1} <1, phi_j>_{L^2(c,d)}`` for ``phi_j = sin(j pi x)``."""
    j = np.arange(1, N + 1, dtype=float)
    return (np.cos(j * np.pi * (c + 1)) - np.cos(j * np.pi * (d + 1))) / (np.pi**2 * j**2)


def series_lemma(c: float, d: float, N: int) -> Tuple[float, float]:
    if N < 1:
        raise InvalidInputError("N must be >= 1")
    if not -1 < c < d < 1:
        raise InvalidInputError(f"invalid window ({c}, {d})")
    terms = series_terms(c, d, N)
    return float(math.fsum(terms[::-1])), (c * c - d * d) / 4


def write_norm_series(sol: ControlSolution, times: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["# schema control_norm v1"])
        w.writerow(["t", "control_l2_omega"])
        for t, v in zip(times, sol.norm_series()):
            w.writerow([repr(float(t)), repr(float(v))])
