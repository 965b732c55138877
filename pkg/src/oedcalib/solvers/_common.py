"""Helpers shared by the solvers."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from ..design import Design, Scale, merge_support, transform_design
from ..model import CalibrationModel


def default_merge(design: Design, model: CalibrationModel) -> Design:
    return merge_support(design, space=model.response_space)


def both_scales(design: Design, model: CalibrationModel, theta) -> tuple[Design, Design]:
    return design, transform_design(design, model, theta)


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    e = np.exp(z - z.max())
    return e / e.sum()


def polish_design(value, design: Design, model: CalibrationModel, *, maxiter: int = 20000) -> Design:
    """Locally refine support points and weights of a response-scale design.

    ``value(design)`` is minimised with bounded Nelder-Mead over the points
    (kept in the response space) and log-weights. Returns the input unchanged
    if no improvement is found.
    """
    sp = model.response_space
    k = design.k
    p0 = design.points
    z0 = np.log(np.maximum(design.weights, 1e-12))
    z0 = z0 - z0[-1]
    x0 = np.concatenate([np.clip(p0, sp.lo, sp.hi), np.clip(z0[:-1], -30.0, 30.0)])
    bounds = [(sp.lo, sp.hi)] * k + [(-30.0, 30.0)] * (k - 1)

    def unpack(x):
        pts = np.clip(x[:k], sp.lo, sp.hi)
        w = softmax(np.concatenate([x[k:], [0.0]]))
        return pts, w

    def obj(x):
        pts, w = unpack(x)
        if np.any(np.diff(np.sort(pts)) <= 0):
            return np.inf
        try:
            v = value(Design.from_unsorted(Scale.RESPONSE, pts, w))
        except Exception:  # noqa: BLE001 - any failure is simply an infeasible trial point
            return np.inf
        return v if np.isfinite(v) else np.inf

    v0 = obj(x0)
    res = minimize(obj, x0, method="Nelder-Mead", bounds=bounds,
                   options={"xatol": 1e-11, "fatol": 1e-14 * max(1.0, abs(v0)), "maxiter": maxiter,
                            "maxfev": maxiter, "adaptive": True})
    if not np.isfinite(res.fun) or res.fun >= v0:
        return design
    pts, w = unpack(res.x)
    return Design.from_unsorted(Scale.RESPONSE, pts, w)


def reweight(value, design: Design, *, maxiter: int = 4000) -> Design:
    """Minimise ``value(design)`` over the weights with the support held fixed."""
    if design.k < 2:
        return design
    z0 = np.log(np.maximum(design.weights, 1e-12))
    z0 = z0[:-1] - z0[-1]

    def build(z):
        return Design(design.scale, design.points, softmax(np.concatenate([z, [0.0]])))

    def obj(z):
        try:
            v = value(build(z))
        except Exception:  # noqa: BLE001
            return np.inf
        return v if np.isfinite(v) else np.inf

    v0 = obj(z0)
    res = minimize(obj, z0, method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-12 * max(1.0, abs(v0)), "maxiter": maxiter})
    if not np.isfinite(res.fun) or res.fun >= v0:
        return design
    return build(res.x)
