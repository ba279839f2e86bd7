"""Closed-form spectrum of the mode operator for n != 0.

With ``lambda = -nu^2 - n^2`` the eigenvalue condition is
``(nu^2/n^2 + 1) tan(2 nu) = sigma nu``.  Roots are bracketed branch by
branch; we solve the pole-free form ``(nu^2/n^2 + 1) sin(2 nu) - sigma nu cos(2 nu)``
so that brackets touching a pole of ``tan`` are harmless.

Besides the roots ``nu_k`` in ``(k pi/2, k pi/2 + pi/4)``, ``k >= 1``, there is
exactly one extra eigenvalue with index 0:

* ``sigma > 2``: a root ``nu_0`` in ``(0, pi/4)`` of the same equation,
* ``sigma = 2``: ``lambda = -n^2`` exactly,
* ``sigma < 2``: ``lambda = nu_0^2 - n^2`` with ``nu_0`` the positive root of
  ``f(nu) = (-nu^2 - sigma n^2 nu + n^2) + (nu^2 - sigma n^2 nu - n^2) e^{-4 nu}``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .model import InvalidInputError

SUPERCRITICAL = "supercritical"
CRITICAL = "critical"
SUBCRITICAL = "subcritical"

ROOT_TOL = 1e-11
# brentq rejects rtol below 4*eps
_RTOL = 4 * np.finfo(float).eps


class RootFindingError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenPair:
    n: float
    k: int
    lam: float
    case: str
    nu: float
    c_norm: float
    sigma: float
    branch: Optional[int] = None

    @property
    def eps(self) -> Optional[float]:
        """Offset ``k pi/2 + pi/4 - nu`` of a branch root from its pole."""
        if self.branch is None:
            return None
        return self.branch * math.pi / 2 + math.pi / 4 - self.nu


@dataclass
class Spectrum:
    sigma: float
    n: float
    pairs: List[EigenPair] = field(default_factory=list)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([p.lam for p in self.pairs])

    def gaps(self) -> np.ndarray:
        return -np.diff(self.eigenvalues)

    def to_csv(self, path_or_writer) -> None:
        rows = self.rows()
        if hasattr(path_or_writer, "writerow"):
            for r in rows:
                path_or_writer.writerow(r)
            return
        with open(path_or_writer, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["# schema spectrum v1"])
            w.writerow(SPECTRUM_HEADER)
            for r in rows:
                w.writerow(r)

    def rows(self):
        gaps = list(self.gaps()) + [float("nan")]
        return [[p.n, p.k, p.case, repr(p.lam), repr(p.nu), repr(p.c_norm), repr(float(g))]
                for p, g in zip(self.pairs, gaps)]


SPECTRUM_HEADER = ["n", "k", "case", "lambda", "nu", "c_norm", "gap_to_next"]


def branch_function(nu, n, sigma):
    """Pole-free form of the branch equation."""
    return (nu * nu / (n * n) + 1.0) * np.sin(2 * nu) - sigma * nu * np.cos(2 * nu)


def tan_residual(nu, n, sigma) -> float:
    """Absolute residual of ``(nu^2/n^2 + 1) tan(2 nu) - sigma nu``."""
    return abs((nu * nu / (n * n) + 1.0) * math.tan(2 * nu) - sigma * nu)


def _subcritical_poly_roots(n, sigma) -> Tuple[float, float]:
    """Roots of ``nu^2 + sigma n^2 nu - n^2``, the larger one without cancellation."""
    n2 = float(n) ** 2
    disc = math.sqrt(n2 * n2 * sigma * sigma + 4 * n2)
    return 2 * n2 / (disc + n2 * sigma), -0.5 * (disc + n2 * sigma)


def subcritical_function(nu, n, sigma):
    """``(-nu^2 - sigma n^2 nu + n^2) + (nu^2 - sigma n^2 nu - n^2) e^{-4 nu}``.

    The polynomial part is evaluated in factored form so that its sign is exact
    near the positive polynomial root, where the exponential part is tiny.
    """
    n2 = float(n) ** 2
    up, um = _subcritical_poly_roots(n, sigma)
    return -(nu - up) * (nu - um) + (nu * nu - sigma * n2 * nu - n2) * np.exp(-4 * nu)


def _bracket(f, lo, hi, what):
    """Shrink ``(lo, hi)`` by a relative margin until ``f`` changes sign."""
    width = hi - lo
    delta = 1e-8 * width
    while delta < 0.25 * width:
        a, b = lo + delta, hi - delta
        fa, fb = f(a), f(b)
        if fa * fb < 0:
            return a, b
        delta *= 10
    raise RootFindingError(f"no sign change for {what} on ({lo}, {hi})")


def _polish(f, df, x, a, b, iters=3):
    """Safeguarded Newton: accept a step only if it stays in the bracket and lowers |f|."""
    fx = f(x)
    for _ in range(iters):
        d = df(x)
        if d == 0 or fx == 0:
            break
        y = x - fx / d
        if not a < y < b:
            break
        fy = f(y)
        if abs(fy) >= abs(fx):
            break
        x, fx = y, fy
    return x


def branch_root(n, sigma, k: int) -> float:
    """Root ``nu_k`` in ``(k pi/2, k pi/2 + pi/4)``; ``k = 0`` requires ``sigma > 2``."""
    if n == 0:
        raise InvalidInputError("n must be nonzero")
    if not sigma > 0:
        raise InvalidInputError("sigma must be > 0")
    if k < 0 or (k == 0 and not sigma > 2):
        raise InvalidInputError(f"branch {k} has no root for sigma={sigma}")
    lo, hi = k * math.pi / 2, k * math.pi / 2 + math.pi / 4
    f = lambda v: branch_function(v, n, sigma)  # noqa: E731
    n2 = float(n) ** 2

    def df(v):
        return (2 * v / n2) * math.sin(2 * v) + 2 * (v * v / n2 + 1) * math.cos(2 * v) \
            - sigma * math.cos(2 * v) + 2 * sigma * v * math.sin(2 * v)

    a, b = _bracket(f, lo, hi, f"branch {k} (n={n}, sigma={sigma})")
    nu = brentq(f, a, b, xtol=1e-300, rtol=_RTOL, maxiter=500)
    nu = _polish(f, df, nu, lo, hi)
    if not lo < nu < hi:
        raise RootFindingError(f"root {nu} escaped ({lo}, {hi})")
    return nu


def subcritical_root(n, sigma) -> float:
    """Positive root of ``f`` below ``(sqrt(n^4 sigma^2 + 4 n^2) - n^2 sigma)/2``."""
    if n == 0:
        raise InvalidInputError("n must be nonzero")
    if not 0 < sigma < 2:
        raise RootFindingError(f"subcritical root requires 0 < sigma < 2, got {sigma}")
    upper, _ = _subcritical_poly_roots(n, sigma)
    f = lambda v: subcritical_function(v, n, sigma)  # noqa: E731
    # f(0) = 0 with f'(0) = 2 n^2 (2 - sigma) > 0, and f(upper) = -2 sigma n^2 upper e^{-4 upper}
    fu = f(upper)
    if fu == 0:
        return upper
    lo = 1e-8 * upper
    while f(lo) <= 0 and lo < 0.5 * upper:
        lo *= 2
    if not (f(lo) > 0 > fu):
        raise RootFindingError(f"no bracket for the subcritical root (n={n}, sigma={sigma})")
    return brentq(f, lo, upper, xtol=1e-300, rtol=_RTOL, maxiter=500)


def _is_critical(sigma) -> bool:
    if sigma == 2:
        return True
    if abs(sigma - 2) < 1e-13:
        warnings.warn(f"sigma={sigma!r} is within 1e-13 of 2; treated as non-critical")
    return False


def normalization(case: str, nu: float, n, sigma) -> float:
    """``C > 0`` making ``(phi, -phi(1)/(sigma n^2))`` a unit vector."""
    sn2 = sigma * float(n) ** 2
    if case == SUPERCRITICAL:
        inv = (1 - math.sin(4 * nu) / (4 * nu)) + math.sin(2 * nu) ** 2 / sn2
    elif case == CRITICAL:
        inv = 8.0 / 3.0 + 4.0 / sn2
    else:
        inv = math.exp(-2 * nu) * (math.sinh(4 * nu) - 4 * nu) / nu \
            + (math.exp(nu) - math.exp(-3 * nu)) ** 2 / sn2
    return 1.0 / math.sqrt(inv)


def _pair(n, sigma, k, case, nu, lam, branch=None) -> EigenPair:
    return EigenPair(n=n, k=k, lam=lam, case=case, nu=nu,
                     c_norm=normalization(case, nu, n, sigma), sigma=sigma, branch=branch)


def spectrum(n, sigma, K: int) -> Spectrum:
    """The ``K`` largest eigenvalues of the mode-``n`` operator, decreasing."""
    if n == 0:
        raise InvalidInputError("n must be nonzero")
    if not sigma > 0:
        raise InvalidInputError("sigma must be > 0")
    if K < 1:
        raise InvalidInputError("K must be >= 1")
    n2 = float(n) ** 2
    pairs = []
    critical = _is_critical(sigma)
    if sigma > 2:
        nu = branch_root(n, sigma, 0)
        pairs.append(_pair(n, sigma, 0, SUPERCRITICAL, nu, -nu * nu - n2, branch=0))
    elif critical:
        pairs.append(_pair(n, sigma, 0, CRITICAL, 0.0, -n2))
    else:
        nu = subcritical_root(n, sigma)
        pairs.append(_pair(n, sigma, 0, SUBCRITICAL, nu, nu * nu - n2))
    for k in range(1, K):
        nu = branch_root(n, sigma, k)
        pairs.append(_pair(n, sigma, k, SUPERCRITICAL, nu, -nu * nu - n2, branch=k))
    return Spectrum(sigma=sigma, n=n, pairs=pairs[:K])


def eigenfunction(pair: EigenPair, x2) -> Tuple[np.ndarray, float]:
    """Samples of the normalized ``phi`` and the height component ``-phi(1)/(sigma n^2)``."""
    x = np.asarray(x2, dtype=float)
    C, nu = pair.c_norm, pair.nu
    if pair.case == SUPERCRITICAL:
        phi = C * np.sin(nu * (1 + x))
        top = C * math.sin(2 * nu)
    elif pair.case == CRITICAL:
        phi = C * (1 + x)
        top = 2 * C
    else:
        phi = C * (np.exp(nu * x) - np.exp(-nu * (2 + x)))
        top = C * (math.exp(nu) - math.exp(-3 * nu))
    return phi, -top / (pair.sigma * float(pair.n) ** 2)


def window_mass(pair: EigenPair, c: float, d: float) -> float:
    """Closed-form ``||phi||_{L^2(c, d)}``."""
    if not -1 <= c < d <= 1:
        raise InvalidInputError(f"invalid window ({c}, {d})")
    C, nu = pair.c_norm, pair.nu
    if pair.case == SUPERCRITICAL:
        m2 = 0.5 * C * C * ((d - c) + (math.sin(2 * nu * (c + 1)) - math.sin(2 * nu * (d + 1)))
                            / (2 * nu))
    elif pair.case == CRITICAL:
        m2 = C * C * ((d + 1) ** 3 - (c + 1) ** 3) / 3
    else:
        m2 = C * C * math.exp(-2 * nu) * (math.sinh(2 * nu * (d + 1)) - math.sinh(2 * nu * (c + 1))
                                          - 2 * nu * (d - c)) / nu
    return math.sqrt(max(m2, 0.0))


@dataclass
class SpectralReport:
    n: float
    sigma: float
    K: int
    checks: dict
    max_residual: float
    max_tan_rel_residual: float
    min_gap: float
    max_eigenvalue: float

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def root_residuals(pair: EigenPair) -> Tuple[float, float]:
    """Absolute residual in the defining equation and tan-form relative residual."""
    n, s, nu = pair.n, pair.sigma, pair.nu
    if pair.case == CRITICAL:
        return 0.0, 0.0
    if pair.case == SUBCRITICAL:
        n2 = float(n) ** 2
        scale = max(n2, s * n2 * nu, nu * nu)
        r = abs(subcritical_function(nu, n, s)) / scale
        return r, r
    return abs(branch_function(nu, n, s)), tan_residual(nu, n, s) / (s * nu)


def spectral_checks(n, sigma, K: int) -> SpectralReport:
    """Residual, spectral-gap, separation and case-consistency checks."""
    spec = spectrum(n, sigma, K)
    lam = spec.eigenvalues
    n2 = float(n) ** 2
    res = [root_residuals(p) for p in spec.pairs]
    max_res = max(r[0] for r in res)
    max_rel = max(r[1] for r in res)
    gaps = spec.gaps()
    min_gap = float(gaps.min()) if gaps.size else float("inf")
    later = gaps[1:] if gaps.size > 1 else np.array([np.inf])
    bound = -min(sigma / 2, 1.0) * n2
    cases = {p.case for p in spec.pairs}
    checks = {
        "residual": max_res <= ROOT_TOL,
        "negative": bool(np.all(lam < 0)),
        "spectral_gap": bool(np.all(lam <= bound * (1 - 1e-14))),
        "decreasing": bool(np.all(np.diff(lam) < 0)),
        "separation": min_gap >= math.pi**2 / 4 - 1e-9,
        "later_separation": float(later.min()) >= 3 * math.pi**2 / 8 - 1e-9,
        "branch_interval": all(p.eps is None or 0 < p.eps < math.pi / 4 for p in spec.pairs),
        "case_exclusive": (SUBCRITICAL not in cases or sigma < 2)
        and (CRITICAL not in cases or sigma == 2),
    }
    return SpectralReport(n, sigma, K, checks, max_res, max_rel, min_gap, float(lam[0]))
