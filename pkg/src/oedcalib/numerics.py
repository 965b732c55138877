"""Small numerical kernels: root finding, quadrature, symmetric algebra, box search."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.stats import qmc

from .errors import NonFinite, NotPSD, TargetOutOfRange

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError(f"interval bounds must be finite, got [{self.lo}, {self.hi}]")
        if not self.lo < self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def contains(self, x, slack: float = 0.0):
        x = np.asarray(x, dtype=float)
        return (x >= self.lo - slack) & (x <= self.hi + slack)

    def linspace(self, num: int) -> np.ndarray:
        return np.linspace(self.lo, self.hi, num)

    def as_tuple(self) -> tuple[float, float]:
        return (self.lo, self.hi)


def invert_monotone(
    g: Callable[[float], float],
    target: float,
    domain: Interval,
    tol: float = 1e-10,
    dg: Callable[[float], float] | None = None,
) -> float:
    """Solve ``g(y) = target`` for a continuous strictly monotone ``g``.

    A bracketing solve narrows the root to ``1e-12 * domain.length``; when the
    derivative ``dg`` is supplied up to five Newton steps polish the result,
    each step kept only if it stays inside the bracket and lowers the residual.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = domain.lo, domain.hi
    glo, ghi = float(g(lo)), float(g(hi))
    if not (math.isfinite(glo) and math.isfinite(ghi)):
        raise NonFinite(f"g is not finite at the ends of [{lo}, {hi}]")
    scale = tol * max(1.0, abs(target))
    if abs(glo - target) <= scale * 1e-3:
        return lo
    if abs(ghi - target) <= scale * 1e-3:
        return hi
    if (glo - target) * (ghi - target) > 0:
        if abs(glo - target) <= scale:
            return lo
        if abs(ghi - target) <= scale:
            return hi
        raise TargetOutOfRange(
            f"target {target!r} not bracketed by g on [{lo}, {hi}] (g: {glo!r} .. {ghi!r})"
        )

    def shifted(y):
        v = float(g(y))
        if not math.isfinite(v):
            raise NonFinite(f"g({y!r}) is not finite")
        return v - target

    y = brentq(shifted, lo, hi, xtol=1e-12 * domain.length, rtol=4 * np.finfo(float).eps)
    if dg is not None:
        r = shifted(y)
        for _ in range(5):
            d = float(dg(y))
            if d == 0 or not math.isfinite(d) or r == 0:
                break
            y_new = min(max(y - r / d, lo), hi)
            r_new = shifted(y_new)
            if abs(r_new) >= abs(r):
                break
            y, r = y_new, r_new
    if abs(shifted(y)) > scale:
        raise TargetOutOfRange(f"could not reach target {target!r} to tolerance {tol}")
    return float(y)


@lru_cache(maxsize=32)
def _legendre_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_nodes(domain: Interval, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped onto ``domain``."""
    if nodes < 2:
        raise ValueError("need at least 2 quadrature nodes")
    x, w = _legendre_rule(int(nodes))
    half = 0.5 * domain.length
    return domain.lo + half * (x + 1.0), half * w


def gauss_legendre(g: Callable, domain: Interval, nodes: int = 64):
    """Integrate ``g`` over ``domain``.

    ``g`` is called once with the full node array. It may return one value per
    node, an array whose leading axis runs over nodes (integrated
    componentwise), or a scalar for a constant integrand.
    """
    x, w = gauss_nodes(domain, nodes)
    vals = np.asarray(g(x), dtype=float)
    if vals.ndim == 0:
        vals = np.full(x.shape, float(vals))
    elif vals.shape[0] != x.shape[0]:
        raise ValueError("integrand must return one value (or row) per node")
    if not np.all(np.isfinite(vals)):
        raise NonFinite("integrand is not finite at every quadrature node")
    out = np.tensordot(w, vals, axes=(0, 0))
    return float(out) if np.ndim(out) == 0 else out


def symmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + M.T)


def _equilibrate(M: np.ndarray) -> np.ndarray:
    d = np.diag(M).copy()
    s = np.ones_like(d)
    pos = d > 0
    s[pos] = 1.0 / np.sqrt(d[pos])
    return s


def sym_inverse(M) -> tuple[np.ndarray, int]:
    """Moore-Penrose pseudoinverse of a symmetric matrix, plus its numerical rank.

    Rank is judged on the diagonally equilibrated matrix with a relative
    eigenvalue cutoff of ``RANK_RTOL``. Full-rank inputs are inverted in the
    equilibrated basis, which is markedly more accurate for information
    matrices whose entries span many orders of magnitude.
    """
    M = symmetrize(M)
    m = M.shape[0]
    s = _equilibrate(M)
    E = symmetrize(M * np.outer(s, s))
    lam = np.linalg.eigvalsh(E)
    top = np.max(np.abs(lam)) if lam.size else 0.0
    if top == 0.0:
        return np.zeros_like(M), 0
    rank = int(np.sum(np.abs(lam) > RANK_RTOL * top))
    if rank == m:
        inv = np.linalg.inv(E)
        return symmetrize(inv * np.outer(s, s)), rank
    lam, V = np.linalg.eigh(M)
    keep = np.abs(lam) > RANK_RTOL * np.max(np.abs(lam))
    inv = (V[:, keep] / lam[keep]) @ V[:, keep].T
    return symmetrize(inv), rank


def log_det(M, psd_tol: float = 1e-10) -> float:
    """Log-determinant of a PSD matrix; ``-inf`` when it is numerically singular."""
    M = symmetrize(M)
    s = _equilibrate(M)
    if np.any(np.diag(M) <= 0):
        if np.any(np.diag(M) < -psd_tol * max(1.0, np.max(np.abs(M)))):
            raise NotPSD("negative diagonal entry")
        return -math.inf
    lam = np.linalg.eigvalsh(M * np.outer(s, s))
    top = np.max(np.abs(lam))
    if lam[0] < -psd_tol * top:
        raise NotPSD(f"matrix has eigenvalue {lam[0]:.3e} (largest {top:.3e})")
    if lam[0] <= RANK_RTOL * top:
        return -math.inf
    E = symmetrize(M * np.outer(s, s))
    try:
        # Cholesky is more accurate than the eigenvalues for the smallest directions
        L = np.linalg.cholesky(E)
        ld = 2.0 * float(np.sum(np.log(np.diag(L))))
    except np.linalg.LinAlgError:
        ld = float(np.sum(np.log(lam)))
    return ld - 2.0 * float(np.sum(np.log(s)))


def start_points(box: Sequence[Interval], starts: int) -> np.ndarray:
    """Deterministic stratified start points (unscrambled Halton, origin skipped)."""
    k = len(box)
    u = qmc.Halton(d=k, scramble=False).random(starts + 1)[1:]
    lo = np.array([iv.lo for iv in box])
    hi = np.array([iv.hi for iv in box])
    return lo + u * (hi - lo)


def minimize_box(
    g: Callable[[np.ndarray], float],
    box: Sequence[Interval],
    starts: int = 32,
    *,
    xatol: float = 1e-10,
    fatol: float = 1e-14,
    maxiter: int = 4000,
    extra_starts: Sequence[Sequence[float]] = (),
) -> tuple[np.ndarray, float]:
    """Multistart bounded Nelder-Mead over a box of at most six dimensions."""
    k = len(box)
    if not 1 <= k <= 6:
        raise ValueError("minimize_box supports 1 to 6 dimensions")
    lo = np.array([iv.lo for iv in box])
    hi = np.array([iv.hi for iv in box])

    def safe(x):
        v = float(g(np.clip(x, lo, hi)))
        return v if math.isfinite(v) else math.inf

    X0 = start_points(box, starts)
    if len(extra_starts):
        X0 = np.vstack([np.clip(np.asarray(extra_starts, dtype=float), lo, hi), X0])
    best_x, best_v = None, math.inf
    any_finite = False
    for x0 in X0:
        v0 = safe(x0)
        if not math.isfinite(v0):
            continue
        any_finite = True
        res = minimize(
            safe,
            x0,
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={"xatol": xatol, "fatol": fatol, "maxiter": maxiter * k, "maxfev": maxiter * k},
        )
        x = np.clip(res.x, lo, hi)
        v = safe(x)
        if v > v0:
            x, v = x0, v0
        if v < best_v:
            best_x, best_v = x, v
    if not any_finite:
        raise NonFinite("objective is not finite at any start point")
    return best_x, best_v
