"""Optimality criteria, sensitivity functions and equivalence-theorem bounds.

All criteria are minimised. ``phi_d`` is ``det(M)^(-1/m)``, ``phi_c`` is
``c' M^- c``, and the two calibration criteria take the maximum (G_I) or the
average (V_I) over the response space of the inverse-prediction variance
``dmu/dtheta' M^- dmu/dtheta``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize_scalar

from . import _kernels
from .design import Design, InformationMatrix, fim, to_response
from .errors import NotEstimable, SingularDesign, Unsupported
from .model import CalibrationModel, RegressorMode
from .numerics import gauss_nodes, log_det, sym_inverse

ESTIMABILITY_RTOL = 1e-8
DEFAULT_NODES = 64
DEFAULT_GI_GRID = 2000
DEFAULT_CERT_GRID = 4000


class Kind(enum.Enum):
    D = "D"
    C = "C"
    GI = "GI"
    VI = "VI"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("_", "")
        return cls(key)


@dataclass(frozen=True)
class CriterionSpec:
    kind: Kind
    c: tuple[float, ...] | None = None
    nodes: int = DEFAULT_NODES
    grid: int = DEFAULT_GI_GRID
    mode: RegressorMode = RegressorMode.CALIBRATION

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        object.__setattr__(self, "mode", RegressorMode.parse(self.mode))
        if self.kind is Kind.C:
            if self.c is None or not np.any(np.asarray(self.c, dtype=float) != 0):
                raise ValueError("c-criterion needs a nonzero c vector")
            object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        if self.nodes < 16:
            raise ValueError("use at least 16 quadrature nodes")
        if self.grid < 2:
            raise ValueError("grid needs at least 2 points")

    @property
    def label(self) -> str:
        if self.kind is Kind.C:
            return "c(" + ",".join(f"{v:g}" for v in self.c) + ")"
        return self.kind.value

    @classmethod
    def d(cls, **kw):
        return cls(Kind.D, **kw)

    @classmethod
    def gi(cls, **kw):
        return cls(Kind.GI, **kw)

    @classmethod
    def vi(cls, **kw):
        return cls(Kind.VI, **kw)

    @classmethod
    def c_vector(cls, c, **kw):
        return cls(Kind.C, c=tuple(c), **kw)


def _mat(M) -> np.ndarray:
    return M.matrix if isinstance(M, InformationMatrix) else np.asarray(M, dtype=float)


def phi_d(M) -> float:
    A = _mat(M)
    ld = log_det(A)
    if ld == -math.inf:
        return math.inf
    return math.exp(-ld / A.shape[0])


def in_range(M: np.ndarray, Minv: np.ndarray, v: np.ndarray, rtol: float = ESTIMABILITY_RTOL) -> np.ndarray:
    """Row-wise test that ``v`` lies in the column space of ``M``."""
    v = np.atleast_2d(v)
    resid = v - v @ (M @ Minv).T
    return np.linalg.norm(resid, axis=1) <= rtol * np.linalg.norm(v, axis=1)


def phi_c(M, c) -> float:
    A = _mat(M)
    c = np.asarray(c, dtype=float)
    Minv, rank = sym_inverse(A)
    if rank < A.shape[0] and not in_range(A, Minv, c)[0]:
        raise NotEstimable(f"c = {tuple(c)} is not estimable (rank {rank})")
    return float(c @ Minv @ c)


@dataclass(frozen=True, eq=False)
class _Prepared:
    """Everything the variance-type criteria need from one design."""

    M: np.ndarray
    Minv: np.ndarray
    rank: int
    model: CalibrationModel
    theta: np.ndarray

    @property
    def full_rank(self) -> bool:
        return self.rank == self.M.shape[0]


def prepare(design: Design, model: CalibrationModel, theta=None, mode=RegressorMode.CALIBRATION) -> _Prepared:
    d = to_response(design, model, theta)
    th = model.theta(theta)
    M = fim(d, model, th, mode).matrix
    Minv, rank = sym_inverse(M)
    return _Prepared(M, Minv, rank, model, th)


def _variance(prep: _Prepared, y) -> np.ndarray:
    g = np.atleast_2d(prep.model.dmu_dtheta(np.atleast_1d(y), prep.theta))
    if not prep.full_rank:
        ok = in_range(prep.M, prep.Minv, g) | np.all(g == 0, axis=1)
        if not np.all(ok):
            raise NotEstimable("inverse prediction is not estimable with a singular design")
    return _kernels.quad_form_rows(np.ascontiguousarray(g), prep.Minv)


def var_inverse_prediction(y, design: Design, model: CalibrationModel, theta=None):
    """Variance of the predicted dose at response ``y``."""
    out = _variance(prepare(design, model, theta), y)
    return float(out[0]) if np.ndim(y) == 0 else out.reshape(np.shape(y))


def _refine_extremum(fun, grid: np.ndarray, vals: np.ndarray, k: int, sign: float):
    """Polish a grid extremum inside its neighbouring cells.

    ``sign=+1`` looks for a maximum, ``-1`` for a minimum; returns ``(y, value)``.
    """
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    best_y, best_v = grid[k], vals[k]
    if hi > lo:
        res = minimize_scalar(lambda t: -sign * fun(t), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12 * max(1.0, abs(hi))})
        v = -sign * res.fun
        if sign * v > sign * best_v:
            best_y, best_v = float(res.x), float(v)
    return float(best_y), float(best_v)


def gi_argmax(design: Design, model: CalibrationModel, theta=None, grid: int = DEFAULT_GI_GRID):
    """Location and value of the largest inverse-prediction variance."""
    prep = prepare(design, model, theta)
    ys = model.response_space.linspace(grid)
    vals = _variance(prep, ys)
    k = int(np.argmax(vals))
    return _refine_extremum(lambda t: float(_variance(prep, t)[0]), ys, vals, k, +1.0)


def phi_gi(design: Design, model: CalibrationModel, theta=None, grid: int = DEFAULT_GI_GRID) -> float:
    return gi_argmax(design, model, theta, grid)[1]


@lru_cache(maxsize=64)
def _vi_moment(model: CalibrationModel, theta: tuple, nodes: int) -> np.ndarray:
    """``int g g' dy`` over the response space (g = dmu/dtheta)."""
    x, w = gauss_nodes(model.response_space, nodes)
    G = model.dmu_dtheta(x, np.asarray(theta))
    A = (G * w[:, None]).T @ G
    A = 0.5 * (A + A.T)
    A.flags.writeable = False
    return A


def vi_moment(model: CalibrationModel, theta=None, nodes: int = DEFAULT_NODES) -> np.ndarray:
    return _vi_moment(model, tuple(float(t) for t in model.theta(theta)), int(nodes))


def _vi_nodes_check(prep: _Prepared, nodes: int):
    if not prep.full_rank:
        x, _ = gauss_nodes(prep.model.response_space, nodes)
        _variance(prep, x)


def phi_vi(design: Design, model: CalibrationModel, theta=None, nodes: int = DEFAULT_NODES) -> float:
    """Average inverse-prediction variance over the response space."""
    prep = prepare(design, model, theta)
    _vi_nodes_check(prep, nodes)
    A = vi_moment(model, prep.theta, nodes)
    return float(np.trace(prep.Minv @ A) / model.response_space.length)


def _require_full(prep: _Prepared, what: str):
    if not prep.full_rank:
        raise SingularDesign(f"{what} needs a nonsingular information matrix (rank {prep.rank})")


def sensitivity_d(y, design: Design, model: CalibrationModel, theta=None, mode=RegressorMode.CALIBRATION):
    """``m - f(y)' M^-1 f(y)``; nonnegative everywhere for a D-optimal design."""
    mode = RegressorMode.parse(mode)
    prep = prepare(design, model, theta, mode)
    _require_full(prep, "sensitivity_d")
    F = np.atleast_2d(model.regressor(np.atleast_1d(y), prep.theta, mode))
    out = model.m - _kernels.quad_form_rows(np.ascontiguousarray(F), prep.Minv)
    return float(out[0]) if np.ndim(y) == 0 else out.reshape(np.shape(y))


def sensitivity_vi(y, design: Design, model: CalibrationModel, theta=None, nodes: int = DEFAULT_NODES):
    """Directional derivative of ``phi_vi`` toward the one-point design at ``y``.

    The integrand is ``g'M^-1 g - (g'M^-1 f(y))^2`` integrated over the
    response space with the same normalisation as ``phi_vi``.
    """
    prep = prepare(design, model, theta)
    _require_full(prep, "sensitivity_vi")
    A = vi_moment(model, prep.theta, nodes)
    L = model.response_space.length
    phi = np.trace(prep.Minv @ A) / L
    F = np.atleast_2d(model.regressor(np.atleast_1d(y), prep.theta))
    B = prep.Minv @ A @ prep.Minv
    out = phi - _kernels.quad_form_rows(np.ascontiguousarray(F), 0.5 * (B + B.T)) / L
    return float(out[0]) if np.ndim(y) == 0 else out.reshape(np.shape(y))


def sensitivity_c(y, design: Design, model: CalibrationModel, c, theta=None):
    """Directional derivative of ``phi_c`` toward the one-point design at ``y``."""
    prep = prepare(design, model, theta)
    _require_full(prep, "sensitivity_c")
    c = np.asarray(c, dtype=float)
    F = np.atleast_2d(model.regressor(np.atleast_1d(y), prep.theta))
    u = prep.Minv @ c
    out = float(c @ u) - (F @ u) ** 2
    return float(out[0]) if np.ndim(y) == 0 else out.reshape(np.shape(y))


def criterion_value(design: Design, spec: CriterionSpec, model: CalibrationModel, theta=None) -> float:
    kind = spec.kind
    if kind is Kind.D:
        return phi_d(fim(to_response(design, model, theta), model, theta, spec.mode))
    if kind is Kind.C:
        return phi_c(fim(to_response(design, model, theta), model, theta, spec.mode), spec.c)
    if kind is Kind.GI:
        return phi_gi(design, model, theta, spec.grid)
    return phi_vi(design, model, theta, spec.nodes)


def frechet_derivative(y, design: Design, spec: CriterionSpec, model: CalibrationModel, theta=None):
    """Sensitivity function scaled as the true directional derivative of Phi."""
    if spec.kind is Kind.D:
        phi = criterion_value(design, spec, model, theta)
        return phi * np.asarray(sensitivity_d(y, design, model, theta, spec.mode)) / model.m
    if spec.kind is Kind.C:
        return np.asarray(sensitivity_c(y, design, model, spec.c, theta))
    if spec.kind is Kind.VI:
        return np.asarray(sensitivity_vi(y, design, model, theta, spec.nodes))
    raise Unsupported("the G_I criterion is not differentiable")


def min_sensitivity(design: Design, spec: CriterionSpec, model: CalibrationModel, theta=None,
                    grid: int = DEFAULT_CERT_GRID) -> tuple[float, float]:
    """Grid-and-polish minimum of the directional derivative: ``(y, psi)``."""
    ys = model.response_space.linspace(grid)
    vals = np.asarray(frechet_derivative(ys, design, spec, model, theta))
    k = int(np.argmin(vals))
    return _refine_extremum(
        lambda t: float(frechet_derivative(t, design, spec, model, theta)), ys, vals, k, -1.0
    )


def get_efficiency_bound(design: Design, spec: CriterionSpec, model: CalibrationModel, theta=None,
                         grid: int = DEFAULT_CERT_GRID) -> float:
    """Equivalence-theorem lower bound ``1 + min psi / Phi``, clipped to [0, 1]."""
    if spec.kind is Kind.GI:
        raise Unsupported("no equivalence-theorem bound for the non-differentiable G_I criterion")
    try:
        phi = criterion_value(design, spec, model, theta)
    except NotEstimable:
        return 0.0
    if not math.isfinite(phi):
        return 0.0
    try:
        _, psi = min_sensitivity(design, spec, model, theta, grid)
    except SingularDesign:
        return 0.0
    return float(min(1.0, max(0.0, 1.0 + psi / phi)))
