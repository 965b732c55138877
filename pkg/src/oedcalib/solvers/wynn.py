"""Wynn-type algorithms for the inverse-prediction criteria.

Designs live on a fixed candidate grid over the response space (plus the
initial support), so repeated selections of one point accumulate weight in
place instead of spawning near-duplicates. The information matrix is
rank-one updated each step and rebuilt from the weights every ``refresh``
steps to stop rounding drift.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..criteria import CriterionSpec, get_efficiency_bound, phi_gi, phi_vi, vi_moment
from ..design import Design, Scale, fim, merge_support, to_response
from ..errors import MaxIterations, SingularDesign
from ..model import CalibrationModel
from ..numerics import sym_inverse
from ._common import both_scales, polish_design, reweight
from ._report import DesignReport

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WynnConfig:
    """Settings for the G_I and V_I iterations.

    ``point_tol`` and ``weight_tol`` are the clustering tolerances used when the
    grid-supported iterate is turned into a reported design; ``point_tol`` is a
    fraction of the response-space length.
    """

    initial: Design | None = None
    step: str = "harmonic"          # or "line-search"
    delta: float = 0.999
    max_iter: int = 200_000
    grid: int = 2001
    window: int = 200
    stall_rtol: float = 1e-7
    refresh: int = 50
    point_tol: float = 0.02
    weight_tol: float = 5e-3
    nodes: int = 64
    polish: bool = True
    strict: bool = False

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.step not in ("harmonic", "line-search"):
            raise ValueError(f"unknown step rule {self.step!r}")
        if self.max_iter < 1 or self.window < 1 or self.refresh < 1:
            raise ValueError("iteration counts must be positive")


def initial_design(model: CalibrationModel, config: WynnConfig, theta) -> Design:
    if config.initial is None:
        sp = model.response_space
        return Design.uniform(Scale.RESPONSE, sp.lo + sp.length * np.arange(1, model.m + 1) / model.m)
    d = to_response(config.initial, model, theta)
    if d.k < model.m:
        raise ValueError(f"initial design needs at least {model.m} support points, has {d.k}")
    return d


def _setup(model: CalibrationModel, config: WynnConfig, theta):
    start = initial_design(model, config, theta)
    if sym_inverse(fim(start, model, theta).matrix)[1] < model.m:
        raise SingularDesign("initial design has a singular information matrix")
    cand = np.union1d(model.response_space.linspace(config.grid), start.points)
    w0 = np.zeros(cand.size)
    w0[np.searchsorted(cand, start.points)] = start.weights
    F = np.ascontiguousarray(model.regressor(cand, theta))
    return cand, F, w0


def _cluster(cand: np.ndarray, w: np.ndarray, model: CalibrationModel, config: WynnConfig,
             location: str = "mean") -> Design:
    keep = w > 0
    raw = Design.from_unsorted(Scale.RESPONSE, cand[keep], w[keep] / w[keep].sum())
    return merge_support(raw, point_tol=config.point_tol * model.response_space.length,
                         weight_tol=config.weight_tol, location=location)


def _finish(report: DesignReport, config: WynnConfig) -> DesignReport:
    if not report.converged:
        reason = "hit max_iter" if report.iterations >= config.max_iter else "final design missed the target"
        log.warning("%s iteration not converged after %d iterations (%s)", report.criterion, report.iterations,
                    reason)
        if config.strict:
            raise MaxIterations(f"{report.criterion} did not converge after {report.iterations} iterations "
                                f"({reason})")
    return report


def solve_gi_optimal(model: CalibrationModel, theta=None, config: WynnConfig | None = None) -> DesignReport:
    """Iterate toward the design minimising the largest inverse-prediction variance.

    Each step moves mass to the response value where the variance of the
    predicted dose is largest. The criterion is not differentiable, so the
    loop stops when the best value seen has improved by less than
    ``stall_rtol`` (relative) over the last ``window`` steps.
    """
    config = config or WynnConfig()
    th = model.theta(theta)
    cand, F, w0 = _setup(model, config, th)
    G = np.ascontiguousarray(model.dmu_dtheta(cand, th))
    w_best, w_last, iters, best, trace, converged = _kernels.wynn_gi(
        F, G, w0, config.max_iter, config.window, config.stall_rtol,
        config.step == "line-search", config.refresh,
    )
    # the minimax value is sensitive to point location, so clusters keep their heaviest member
    design = _cluster(cand, w_best, model, config, location="mode")
    # merging moves the satellite mass; rebalance the weights on the pooled support
    if config.polish:
        design = reweight(lambda d: phi_gi(d, model, th), design)
    resp, dose = both_scales(design, model, th)
    value = phi_gi(resp, model, th)
    recent = trace[-1 - config.window] - trace[-1] if trace.size > config.window else float("nan")
    cert = {
        "type": "STAGNATION",
        "window": config.window,
        "rtol": config.stall_rtol,
        "best_grid_value": float(best),
        "improvement_last_window": float(recent),
    }
    report = DesignReport(
        model=model.name,
        theta=tuple(float(t) for t in th),
        criterion="GI",
        value=value,
        design_response=resp,
        design_dose=dose,
        certificate=cert,
        converged=bool(converged),
        iterations=int(iters),
        extras={"trace_head": trace[:10].tolist(), "trace_tail": trace[-10:].tolist(), "step": config.step},
    )
    return _finish(report, config)


def solve_vi_optimal(model: CalibrationModel, theta=None, config: WynnConfig | None = None) -> DesignReport:
    """Iterate toward the design minimising the averaged inverse-prediction variance.

    Mass moves to the response value with the most negative directional
    derivative until the equivalence-theorem bound ``1 + min psi / Phi`` reaches
    ``delta``. The clustered result is then optionally polished by local
    search and re-certified on a fine grid.
    """
    config = config or WynnConfig()
    th = model.theta(theta)
    cand, F, w0 = _setup(model, config, th)
    A = np.ascontiguousarray(vi_moment(model, th, config.nodes))
    w, iters, bound, phi, trace, converged = _kernels.wynn_vi(
        F, A, model.response_space.length, w0, config.max_iter, config.delta,
        config.step == "line-search", config.refresh,
    )
    spec = CriterionSpec.vi(nodes=config.nodes)
    design = _cluster(cand, w, model, config)
    polished = False
    if config.polish:
        refined = polish_design(lambda d: phi_vi(d, model, th, config.nodes), design, model)
        polished = refined is not design
        design = refined
    resp, dose = both_scales(design, model, th)
    final_bound = get_efficiency_bound(resp, spec, model, th)
    cert = {
        "type": "GET",
        "bound": final_bound,
        "iteration_bound": float(bound),
        "delta": config.delta,
        "polished": polished,
    }
    report = DesignReport(
        model=model.name,
        theta=tuple(float(t) for t in th),
        criterion="VI",
        value=phi_vi(resp, model, th, config.nodes),
        design_response=resp,
        design_dose=dose,
        certificate=cert,
        converged=bool(converged) and final_bound >= config.delta,
        iterations=int(iters),
        extras={"grid_value": float(phi), "trace_tail": trace[-10:].tolist(), "step": config.step},
    )
    return _finish(report, config)
