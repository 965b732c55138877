"""Criterion values and efficiencies of a given design against computed optima."""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..criteria import CriterionSpec, Kind, criterion_value
from ..design import Design, to_response, transform_design
from ..errors import NumericalError
from ..model import CalibrationModel
from ._report import DesignReport
from .copt import solve_c_optimal
from .dopt import solve_d_optimal
from .wynn import WynnConfig, solve_gi_optimal, solve_vi_optimal

log = logging.getLogger(__name__)


def default_criteria(model: CalibrationModel) -> list[CriterionSpec]:
    """D, G_I, V_I and one c-criterion per parameter."""
    out = [CriterionSpec.d(), CriterionSpec.gi(), CriterionSpec.vi()]
    out += [CriterionSpec.c_vector(np.eye(model.m)[j]) for j in range(model.m)]
    return out


def criterion_name(spec: CriterionSpec, model: CalibrationModel) -> str:
    """Readable label; unit c-vectors are named after their parameter (``c_alpha``)."""
    if spec.kind is Kind.C:
        c = np.asarray(spec.c)
        nz = np.flatnonzero(c)
        if nz.size == 1 and c[nz[0]] == 1.0:
            return f"c_{model.param_names[nz[0]]}"
    return spec.label


def solve(model: CalibrationModel, theta, spec: CriterionSpec) -> DesignReport:
    """Run the solver matching ``spec``."""
    if spec.kind is Kind.D:
        return solve_d_optimal(model, theta, spec.mode)
    if spec.kind is Kind.C:
        return solve_c_optimal(model, theta, spec.c)
    if spec.kind is Kind.GI:
        return solve_gi_optimal(model, theta)
    return solve_vi_optimal(model, theta, WynnConfig(nodes=spec.nodes))


@functools.lru_cache(maxsize=64)
def _optimum(model: CalibrationModel, theta: tuple, spec: CriterionSpec) -> DesignReport:
    log.info("computing %s-optimal reference design", spec.label)
    return solve(model, np.array(theta), spec)


def optimum(model: CalibrationModel, theta, spec: CriterionSpec) -> DesignReport:
    """Cached optimal design for ``spec`` (keyed on the model object and theta)."""
    return _optimum(model, tuple(float(t) for t in model.theta(theta)), spec)


@dataclass
class CriterionEntry:
    name: str
    value: float | None
    reference_value: float | None
    efficiency: float | None
    error: str | None = None


@dataclass
class EvaluationReport:
    model: str
    theta: tuple[float, ...]
    design_response: Design
    design_dose: Design
    entries: list[CriterionEntry] = field(default_factory=list)

    @property
    def efficiencies(self) -> dict[str, float | None]:
        return {e.name: e.efficiency for e in self.entries}


def evaluate_fixed_design(design: Design, model: CalibrationModel, theta=None, criteria=None,
                          references: dict | None = None) -> EvaluationReport:
    """Evaluate ``design`` (either scale) under each criterion.

    ``references`` may map a criterion name to a reference value or design;
    otherwise the optimum is computed. A failure in one criterion is recorded
    in its entry and does not stop the others.
    """
    th = model.theta(theta)
    resp = to_response(design, model, th)
    dose = transform_design(resp, model, th)
    criteria = list(criteria) if criteria is not None else default_criteria(model)
    references = references or {}
    report = EvaluationReport(model.name, tuple(float(t) for t in th), resp, dose)
    for spec in criteria:
        name = criterion_name(spec, model)
        value = ref = eff = None
        err = None
        try:
            value = criterion_value(resp, spec, model, th)
            if not math.isfinite(value):
                raise NumericalError(f"{name} is infinite for this design")
            ref = references.get(name)
            if isinstance(ref, Design):
                ref = criterion_value(ref, spec, model, th)
            elif ref is None:
                ref = optimum(model, th, spec).value
            eff = float(ref) / value
        except NumericalError as exc:
            err = f"{type(exc).__name__}: {exc}"
            log.warning("%s: %s", name, err)
        report.entries.append(CriterionEntry(name, value, None if ref is None else float(ref), eff, err))
    return report
