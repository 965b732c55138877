"""Equal-weight D-optimal search with an equivalence-theorem certificate."""

from __future__ import annotations

import logging
import math

import numpy as np

from .. import _kernels
from ..criteria import CriterionSpec, get_efficiency_bound, min_sensitivity, phi_d, sensitivity_d
from ..design import Design, Scale, fim, merge_support
from ..errors import CertificationFailed
from ..model import CalibrationModel, RegressorMode
from ..numerics import log_det, minimize_box, sym_inverse
from ._common import both_scales, default_merge, polish_design
from ._report import DesignReport

log = logging.getLogger(__name__)

CERT_RTOL = 1e-3


def _neg_logdet(model: CalibrationModel, theta, mode):
    def obj(points: np.ndarray) -> float:
        F = model.regressor(points, theta, mode)
        w = np.full(points.shape[0], 1.0 / points.shape[0])
        ld = log_det(_kernels.weighted_gram(np.ascontiguousarray(F), w))
        return -ld

    return obj


def d_certificate(design: Design, model: CalibrationModel, theta, mode, grid: int = 4000) -> dict:
    """Grid minimum of ``m - d(y)`` and its values on the support."""
    spec = CriterionSpec.d(mode=mode)
    y_min, _ = min_sensitivity(design, spec, model, theta, grid)
    ys = model.response_space.linspace(grid)
    psi = sensitivity_d(ys, design, model, theta, mode)
    psi_min = min(float(psi.min()), float(sensitivity_d(y_min, design, model, theta, mode)))
    at_support = sensitivity_d(design.points, design, model, theta, mode)
    return {
        "type": "GET",
        "bound": get_efficiency_bound(design, spec, model, theta, grid),
        "min_sensitivity": psi_min,
        "argmin": y_min,
        "support_sensitivity": [float(v) for v in np.atleast_1d(at_support)],
    }


def fim_rank(design: Design, model: CalibrationModel, theta, mode) -> int:
    return sym_inverse(fim(design, model, theta, mode).matrix)[1]


def _certified(cert: dict, m: int) -> bool:
    tol = CERT_RTOL * m
    return cert["min_sensitivity"] >= -tol and max(abs(v) for v in cert["support_sensitivity"]) <= tol


def wynn_d(model: CalibrationModel, theta=None, mode=RegressorMode.CALIBRATION, start: Design | None = None,
           grid: int = 2001, max_iter: int = 20000, gap: float = 1e-5) -> Design:
    """Vertex-direction D-optimal design with the classical optimal step length."""
    th = model.theta(theta)
    m = model.m
    cand = model.response_space.linspace(grid)
    if start is not None:
        cand = np.union1d(cand, start.points)
    F = np.ascontiguousarray(model.regressor(cand, th, mode))
    w = np.zeros(cand.size)
    if start is None:
        idx = np.searchsorted(cand, model.response_space.lo + model.response_space.length * np.arange(1, m + 1) / m)
        w[np.clip(idx, 0, cand.size - 1)] = 1.0 / m
    else:
        w[np.searchsorted(cand, start.points)] = start.weights
    M = _kernels.weighted_gram(F, w)
    for s in range(1, max_iter + 1):
        d = _kernels.quad_form_rows(F, _kernels.inv_equilibrated(M))
        k = int(np.argmax(d))
        if d[k] <= m * (1.0 + gap):
            break
        alpha = (d[k] - m) / ((d[k] - 1.0) * m)
        w *= 1.0 - alpha
        w[k] += alpha
        M = _kernels.weighted_gram(F, w) if s % 50 == 0 else (1 - alpha) * M + alpha * np.outer(F[k], F[k])
    keep = w > 0
    raw = Design.from_unsorted(Scale.RESPONSE, cand[keep], w[keep])
    merged = merge_support(raw, point_tol=0.01 * model.response_space.length, weight_tol=1e-3)

    def value(des):
        return -log_det(fim(des, model, th, mode).matrix)

    return polish_design(value, merged, model)


def solve_d_optimal(model: CalibrationModel, theta=None, mode=RegressorMode.CALIBRATION, *,
                    starts: int = 32, cert_grid: int = 4000, force_fallback: bool = False) -> DesignReport:
    """D-optimal design among ``m``-point equal-weight designs, then certified.

    If the certificate fails (or ``force_fallback``), a vertex-direction
    search over general designs takes over; if that also fails,
    ``CertificationFailed`` is raised.
    """
    mode = RegressorMode.parse(mode)
    th = model.theta(theta)
    m = model.m
    box = [model.response_space] * m
    x, _ = minimize_box(_neg_logdet(model, th, mode), box, starts)
    design = default_merge(Design.uniform(Scale.RESPONSE, np.sort(x)), model)
    cert = d_certificate(design, model, th, mode, cert_grid) if fim_rank(design, model, th, mode) == m else None
    method = "equal-weight"
    if force_fallback or cert is None or not _certified(cert, m):
        log.info("equal-weight D search not certified; running vertex-direction fallback")
        design = wynn_d(model, th, mode, start=None if cert is None or force_fallback else design)
        cert = d_certificate(design, model, th, mode, cert_grid)
        method = "vertex-direction"
        if not _certified(cert, m):
            raise CertificationFailed(
                f"D-optimal search not certified: min sensitivity {cert['min_sensitivity']:.3e}"
            )
    resp, dose = both_scales(design, model, th)
    value = phi_d(fim(resp, model, th, mode))
    return DesignReport(
        model=model.name,
        theta=tuple(float(t) for t in th),
        criterion="D" if mode is RegressorMode.CALIBRATION else "D[naive-inverse]",
        value=value,
        design_response=resp,
        design_dose=dose,
        certificate=cert,
        extras={"method": method, "log_det": -m * math.log(value), "mode": mode.value},
    )
