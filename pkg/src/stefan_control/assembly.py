"""Sparse operators for the coupled finite-difference system and its modes."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .model import ControlRegion, DomainConfig, GridSpec, InvalidInputError


@dataclass(frozen=True)
class SparseOperator:
    """Row-compressed matrix plus named index ranges.

    ``block_layout`` maps names such as ``"y[3]"`` or ``"h"`` to column
    slices of the flat state.  ``meta`` carries operator-specific data
    (e.g. the selected node list of a control injection).
    """

    matrix: sp.csr_matrix
    block_layout: Dict[str, slice] = field(default_factory=dict)
    meta: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_entries(cls, nrows, ncols, rows, cols, vals, **kw) -> "SparseOperator":
        """Consolidate (row, col, value) triplets; duplicates are summed."""
        m = sp.coo_matrix((np.asarray(vals, float), (np.asarray(rows), np.asarray(cols))),
                          shape=(nrows, ncols)).tocsr()
        m.sum_duplicates()
        m.sort_indices()
        return cls(m, **kw)

    @property
    def nrows(self) -> int:
        return self.matrix.shape[0]

    @property
    def ncols(self) -> int:
        return self.matrix.shape[1]

    @property
    def shape(self):
        return self.matrix.shape

    def entries(self):
        c = self.matrix.tocoo()
        return list(zip(c.row.tolist(), c.col.tolist(), c.data.tolist()))

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other):
        return self.matrix @ other


@dataclass(frozen=True)
class WeightedMetric:
    """Diagonal inner-product weights for a mode system."""

    weights: np.ndarray

    def inner(self, a, b) -> float:
        return float(np.sum(self.weights * np.conj(a) * b).real)

    def norm(self, a) -> float:
        return float(np.sqrt(self.inner(a, a)))

    @property
    def matrix(self) -> sp.dia_matrix:
        return sp.diags(self.weights)


def circulant(n: int, diag: float, off: float) -> sp.csr_matrix:
    """Symmetric periodic tridiagonal matrix with wraparound corners."""
    idx = np.arange(n)
    rows = np.concatenate([idx, idx, idx])
    cols = np.concatenate([idx, (idx + 1) % n, (idx - 1) % n])
    vals = np.concatenate([np.full(n, diag), np.full(n, off), np.full(n, off)])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def system_layout(grid: GridSpec) -> Dict[str, slice]:
    n1 = grid.n1
    layout = {f"y[{j + 1}]": slice(j * n1, (j + 1) * n1) for j in range(grid.nx)}
    layout["y"] = slice(0, grid.ny)
    layout["h"] = slice(grid.ny, grid.size)
    return layout


def assemble_system(grid: GridSpec, domain: DomainConfig) -> SparseOperator:
    """Block operator of the semi-discrete scheme.

    Interior rows are the periodic 5-point Laplacian.  The top slice couples to
    ``h`` through ``y_{i,nx+1} = sigma*D2 h`` and the ``h`` rows are the centered
    Neumann difference ``(y_{i,nx+1} - y_{i,nx-1})/(2 dx)`` with the same
    substitution.
    """
    if grid.nx < 2:
        raise InvalidInputError("nx must be >= 2")
    nx, n1, dx, sigma = grid.nx, grid.n1, grid.dx, domain.sigma
    eye = sp.identity(n1, format="csr")
    a0 = circulant(n1, -4.0, 1.0) / dx**2
    a1 = eye / dx**2
    d2 = circulant(n1, -2.0, 1.0)
    a2 = sigma / dx**4 * d2
    a3 = -eye / (2 * dx)
    a4 = sigma / (2 * dx**3) * d2

    blocks = [[None] * (nx + 1) for _ in range(nx + 1)]
    for j in range(nx):
        blocks[j][j] = a0
        if j > 0:
            blocks[j][j - 1] = a1
        if j < nx - 1:
            blocks[j][j + 1] = a1
    blocks[nx - 1][nx] = a2
    blocks[nx][nx - 2] = a3
    blocks[nx][nx] = a4
    mat = sp.bmat(blocks, format="csr")
    mat.eliminate_zeros()
    mat.sort_indices()
    return SparseOperator(mat, system_layout(grid),
                          {"dx": dx, "sigma": sigma, "nx": nx, "n1": n1})


def control_nodes(grid: GridSpec, region: ControlRegion) -> np.ndarray:
    """Flat indices of the interior y nodes inside ``region`` (sorted)."""
    x1, x2, n1 = grid.x1, grid.x2, grid.n1
    sel = [j * n1 + i for j in range(grid.nx) for i in range(n1)
           if region.contains(x1[i], x2[j], grid.dx)]
    return np.array(sel, dtype=int)


def assemble_control_injection(grid: GridSpec, region: ControlRegion) -> SparseOperator:
    """0/1 matrix scattering control slots into interior y rows."""
    nodes = control_nodes(grid, region)
    if nodes.size == 0:
        raise InvalidInputError(f"control region {region} contains no grid node")
    m = nodes.size
    return SparseOperator.from_entries(grid.size, m, nodes, np.arange(m), np.ones(m),
                                       block_layout=system_layout(grid),
                                       meta={"nodes": nodes})


def discrete_symbol(p: int, grid: GridSpec) -> float:
    """Eigenvalue of ``-D2`` on horizontal DFT index ``p``."""
    return 4.0 / grid.dx**2 * np.sin(np.pi * p / grid.n1) ** 2


def mode_matrix(s: float, sigma: float, m: int) -> sp.csr_matrix:
    """Mode system with symbol ``s`` on ``m`` interior nodes plus the height."""
    if m < 3:
        raise InvalidInputError("m must be >= 3")
    d = 2.0 / (m + 1)
    main = np.full(m, -2.0 / d**2 - s)
    off = np.full(m - 1, 1.0 / d**2)
    rows = [np.arange(m), np.arange(m - 1), np.arange(1, m), [m - 1, m, m]]
    cols = [np.arange(m), np.arange(1, m), np.arange(m - 1), [m, m - 2, m]]
    vals = [main, off, off, [-sigma * s / d**2, -1.0 / (2 * d), -sigma * s / (2 * d)]]
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(m + 1, m + 1)).tocsr()
    mat.eliminate_zeros()
    return mat


def assemble_mode_operator(n, domain: DomainConfig, m: int,
                           symbol: Optional[float] = None) -> Tuple[SparseOperator, WeightedMetric]:
    """1D operator ``(y'' - s y, y'(1))`` with ``y(1) = -sigma s h`` substituted.

    ``s`` defaults to ``n**2``; pass ``symbol`` to use the discrete horizontal
    symbol instead, which makes the operator an exact diagonal block of
    :func:`assemble_system` under the horizontal DFT.
    """
    if m < 3:
        raise InvalidInputError("m must be >= 3")
    s = float(n) ** 2 if symbol is None else float(symbol)
    d = 2.0 / (m + 1)
    mat = mode_matrix(s, domain.sigma, m)
    hw = domain.sigma * s if s != 0 else 1.0
    weights = np.concatenate([np.full(m, d), [hw]])
    layout = {"y": slice(0, m), "h": slice(m, m + 1)}
    return SparseOperator(mat, layout, {"s": s, "m": m, "dx": d}), WeightedMetric(weights)


def mode_eigenvectors(s: float, sigma: float, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """Dense eigenpairs of a mode system, ordered by decreasing eigenvalue."""
    vals, vecs = np.linalg.eig(mode_matrix(s, sigma, m).toarray())
    order = np.argsort(-vals.real)
    vals, vecs = vals[order], vecs[:, order]
    if np.max(np.abs(vals.imag)) > 1e-8 * np.max(np.abs(vals)):
        raise InvalidInputError("mode operator has complex eigenvalues")
    vecs = vecs.real
    vecs /= np.linalg.norm(vecs, axis=0)
    return vals.real, vecs


def dump_coo(op: SparseOperator, path) -> None:
    """Write ``row col value`` lines with 1-based indices."""
    c = op.matrix.tocoo()
    order = np.lexsort((c.col, c.row))
    with open(path, "w") as fh:
        fh.write(f"% {op.nrows} {op.ncols} {c.nnz}\n")
        for r, col, v in zip(c.row[order], c.col[order], c.data[order]):
            fh.write(f"{r + 1} {col + 1} {float(v)!r}\n")
