"""c-optimal designs through the boundary of the Elfving set.

A boundary point ``rho * c`` is written as a convex combination
``sum_i w_i eps_i f(t_i)`` of ``m`` signed regressor vectors. Forcing the
components orthogonal to ``c`` to vanish (together with ``sum w = 1``) fixes
the weights as a function of the support, leaving ``|rho|`` to be maximised
over the support alone. The optimal value of ``c' M^- c`` is ``1 / rho**2``.
"""

from __future__ import annotations

import itertools
import logging
import math

import numpy as np
from scipy.linalg import null_space

from ..criteria import CriterionSpec, get_efficiency_bound, phi_c
from ..design import Design, Scale, fim
from ..errors import DegenerateSystem, NotEstimable
from ..model import CalibrationModel
from ..numerics import Interval, minimize_box, sym_inverse
from ._common import both_scales, default_merge, softmax
from ._report import DesignReport

log = logging.getLogger(__name__)

DEFAULT_SEED = 20190501
FEASIBLE_TOL = 1e-12
DET_RTOL = 1e-12


def orth_complement(c: np.ndarray) -> np.ndarray:
    """Columns spanning the orthogonal complement of ``c``.

    For an axis-aligned ``c`` this is the set of the other unit vectors, so the
    linear system reduces to "the components where ``c`` is zero vanish".
    """
    c = np.asarray(c, dtype=float)
    nz = np.flatnonzero(c)
    if nz.size == 1:
        return np.eye(c.size)[:, [j for j in range(c.size) if j != nz[0]]]
    return null_space(c[None, :])


def sign_patterns(m: int) -> np.ndarray:
    """All sign vectors with a leading ``+1`` (the global sign is irrelevant)."""
    rest = list(itertools.product((1.0, -1.0), repeat=m - 1))
    return np.array([(1.0,) + r for r in rest])


def elfving_weights(F: np.ndarray, eps: np.ndarray, Q: np.ndarray, c: np.ndarray):
    """Weights and boundary scalar for batches of supports.

    ``F`` has shape ``(..., m, m)`` with regressors in rows; returns
    ``(w, rho, ok)`` where ``ok`` flags nonsingular systems.
    """
    m = c.size
    V = F * eps[..., :, None]                   # signed rows
    top = np.einsum("jk,...ik->...ji", Q.T, V)  # (..., m-1, m): Q' v_i as columns
    A = np.concatenate([top, np.ones(top.shape[:-2] + (1, m))], axis=-2)
    colnorm = np.prod(np.linalg.norm(A, axis=-2), axis=-1)
    det = np.linalg.det(A)
    ok = np.abs(det) > DET_RTOL * np.where(colnorm > 0, colnorm, 1.0)
    rhs = np.zeros(m)
    rhs[-1] = 1.0
    A_safe = np.where(ok[..., None, None], A, np.eye(m))
    w = np.linalg.solve(A_safe, np.broadcast_to(rhs, A.shape[:-1])[..., None])[..., 0]
    P = np.einsum("...i,...ik->...k", w, V)
    rho = P @ c / (c @ c)
    return w, rho, ok


def _scan(model, th, c, Q, grid: int):
    m = model.m
    sp = model.response_space
    ys = np.linspace(sp.lo, sp.hi, grid + 1)[1:]
    F = model.regressor(ys, th)
    combos = np.array(list(itertools.combinations(range(ys.size), m)))
    best = []
    for eps in sign_patterns(m):
        w, rho, ok = elfving_weights(F[combos], eps, Q, c)
        feas = ok & np.all(w >= -FEASIBLE_TOL, axis=-1)
        score = np.where(feas, np.abs(rho), -np.inf)
        top = np.argsort(score)[::-1][:4]
        best.extend((float(score[i]), eps, ys[combos[i]]) for i in top if np.isfinite(score[i]))
    if not best:
        raise DegenerateSystem("no nonsingular, feasible Elfving system on the scan grid")
    best.sort(key=lambda t: -t[0])
    return best, ys[1] - ys[0]


def _polish(model, th, c, Q, eps, t0, cell):
    sp = model.response_space
    box = [Interval(max(sp.lo, t - 2 * cell), min(sp.hi, t + 2 * cell)) for t in t0]

    def obj(t):
        F = model.regressor(np.asarray(t), th)
        w, rho, ok = elfving_weights(F, eps, Q, c)
        if not ok or np.any(w < -FEASIBLE_TOL):
            return 0.0
        return -abs(float(rho))

    t, v = minimize_box(obj, box, starts=4, xatol=1e-12, fatol=1e-16, extra_starts=[t0])
    return t, -v


def _direct(model, th, c, starts: int):
    """Fallback: minimise ``c' M^- c`` over ``m``-point designs with free weights."""
    m = model.m
    if 2 * m - 1 > 6:
        raise DegenerateSystem("direct c-optimal fallback supports at most three parameters")
    sp = model.response_space
    box = [sp] * m + [Interval(-8.0, 8.0)] * (m - 1)

    def unpack(x):
        return x[:m], softmax(np.concatenate([x[m:], [0.0]]))

    def obj(x):
        pts, w = unpack(x)
        try:
            d = Design.from_unsorted(Scale.RESPONSE, pts, w)
            return phi_c(fim(d, model, th), c)
        except (NotEstimable, ValueError):
            return math.inf

    x, _ = minimize_box(obj, box, starts)
    pts, w = unpack(x)
    return Design.from_unsorted(Scale.RESPONSE, pts, w)


def random_design_check(model: CalibrationModel, theta, c, value: float, n: int = 2000,
                        seed: int = DEFAULT_SEED) -> dict:
    """Compare ``value`` against ``c' M^-1 c`` of ``n`` random ``m``-point designs."""
    rng = np.random.default_rng(seed)
    m = model.m
    sp = model.response_space
    pts = rng.uniform(sp.lo, sp.hi, size=(n, m))
    w = rng.dirichlet(np.ones(m), size=n)
    F = model.regressor(pts, theta)                       # (n, m, m)
    M = np.einsum("ni,nij,nik->njk", w, F, F)
    vals = []
    for Mi in M:
        inv, rank = sym_inverse(Mi)
        if rank == m:
            vals.append(float(c @ inv @ c))
    vals = np.array(vals)
    return {
        "n": int(vals.size),
        "seed": int(seed),
        "min_random": float(vals.min()) if vals.size else math.inf,
        "n_better": int(np.sum(vals < value * (1.0 - 1e-9))),
    }


def solve_c_optimal(model: CalibrationModel, theta=None, c=(0.0, 0.0, 1.0), *, grid: int = 60,
                    candidates: int = 6, starts: int = 32, n_random: int = 2000,
                    seed: int = DEFAULT_SEED) -> DesignReport:
    """c-optimal design for estimating ``c' theta``."""
    th = model.theta(theta)
    c = np.asarray(c, dtype=float)
    if c.shape != (model.m,) or not np.any(c != 0):
        raise ValueError(f"c must be a nonzero vector of length {model.m}")
    Q = orth_complement(c)
    method = "elfving"
    rho = eps = None
    try:
        found, cell = _scan(model, th, c, Q, grid)
        best = (-1.0, None, None)
        for _, e, t0 in found[:candidates]:
            t, r = _polish(model, th, c, Q, e, t0, cell)
            if r > best[0]:
                best = (r, e, t)
        rho, eps, t = best
        F = model.regressor(np.asarray(t), th)
        w, _, _ = elfving_weights(F, eps, Q, c)
        w = np.clip(w, 0.0, None)
        raw = Design.from_unsorted(Scale.RESPONSE, t, w / w.sum())
    except DegenerateSystem as exc:
        log.warning("%s; falling back to direct minimisation", exc)
        method = "direct"
        raw = _direct(model, th, c, starts)
    design = default_merge(raw, model)
    resp, dose = both_scales(design, model, th)
    value = phi_c(fim(resp, model, th), c)
    cert = {"type": "ELFVING", "method": method}
    if rho is not None:
        cert.update(rho=float(rho), signs=[int(s) for s in eps], phi_from_rho=1.0 / rho**2)
    cert["random_check"] = random_design_check(model, th, c, value, n_random, seed)
    if sym_inverse(fim(resp, model, th).matrix)[1] == model.m:
        cert["bound"] = get_efficiency_bound(resp, CriterionSpec.c_vector(c), model, th)
    return DesignReport(
        model=model.name,
        theta=tuple(float(v) for v in th),
        criterion=CriterionSpec.c_vector(c).label,
        value=value,
        design_response=resp,
        design_dose=dose,
        certificate=cert,
        extras={"c": [float(v) for v in c]},
    )
