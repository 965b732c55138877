"""Equal-weight arithmetic and geometric sequence designs with an optimised ratio.

Both families end at the upper endpoint of their space; the single free
ratio ``r`` sets how far the points spread towards the lower end:

* arithmetic: ``hi - r (hi - lo) (n - i) / (n - 1)``
* geometric: ``lo + (hi - lo) r**(n - i)``

for ``i = 1..n``. Dose-scale sequences are mapped to responses before the
information matrix is built.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from ..criteria import CriterionSpec, criterion_value
from ..design import Design, Scale, to_response, transform_design
from ..errors import NumericalError, SingularSequence
from ..model import CalibrationModel
from ..numerics import Interval
from ._report import DesignReport
from .evaluate import criterion_name, optimum

R_RANGE = (0.01, 0.99)


class Family(enum.Enum):
    ARITHMETIC = "arithmetic"
    GEOMETRIC = "geometric"

    @classmethod
    def parse(cls, v) -> "Family":
        if isinstance(v, cls):
            return v
        key = str(v).strip().lower()
        aliases = {"ar": "arithmetic", "arith": "arithmetic", "ge": "geometric", "geom": "geometric"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown sequence family {v!r}") from None


@dataclass(frozen=True)
class SequenceSpec:
    family: Family
    scale: Scale = Scale.RESPONSE
    n: int = 6
    r: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        object.__setattr__(self, "scale", Scale.parse(self.scale))
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("a sequence needs n >= 2 points")
        object.__setattr__(self, "n", int(self.n))
        if self.r is not None and not 0.0 < self.r < 1.0:
            raise ValueError("ratio r must lie in (0, 1)")


def sequence_points(family: Family, space: Interval, n: int, r: float) -> np.ndarray:
    if not 0.0 < r < 1.0:
        raise ValueError("ratio r must lie in (0, 1)")
    k = np.arange(n - 1, -1, -1, dtype=float)  # n - i for i = 1..n
    if Family.parse(family) is Family.ARITHMETIC:
        pts = space.hi - r * space.length * k / (n - 1)
    else:
        pts = space.lo + space.length * r**k
    pts[-1] = space.hi
    return pts


def generate(spec: SequenceSpec, model: CalibrationModel, theta=None, r: float | None = None) -> Design:
    """Equal-weight sequence design on ``spec.scale``."""
    r = spec.r if r is None else r
    if r is None:
        raise ValueError("no ratio given")
    space = model.response_space if spec.scale is Scale.RESPONSE else model.dose_space
    return Design.uniform(spec.scale, sequence_points(spec.family, space, spec.n, r))


def _objective(spec, model, theta, criterion):
    def f(r: float) -> float:
        try:
            d = to_response(generate(spec, model, theta, r), model, theta)
            v = criterion_value(d, criterion, model, theta)
        except NumericalError:
            return math.inf
        return v if math.isfinite(v) else math.inf

    return f


def optimize_sequence(model: CalibrationModel, theta, spec: SequenceSpec, criterion: CriterionSpec, *,
                      reference=None, scan: int = 491) -> DesignReport:
    """Best ratio for ``criterion`` by a grid scan over ``(0.01, 0.99)`` plus Brent refinement.

    ``reference`` (an optimal design, a criterion value, or ``None`` to compute
    the optimum) sets the efficiency reported.
    """
    th = model.theta(theta)
    f = _objective(spec, model, th, criterion)
    rs = np.linspace(*R_RANGE, scan)
    vals = np.array([f(r) for r in rs])
    if not np.any(np.isfinite(vals)):
        raise SingularSequence(f"{spec.family.value} sequence with n={spec.n} is singular for every ratio")
    k = int(np.argmin(vals))
    step = rs[1] - rs[0]
    lo, hi = max(R_RANGE[0], rs[k] - step), min(R_RANGE[1], rs[k] + step)
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    r_star, value = (float(res.x), float(res.fun)) if res.fun <= vals[k] else (float(rs[k]), float(vals[k]))

    native = generate(spec, model, th, r_star)
    resp = to_response(native, model, th)
    dose = transform_design(resp, model, th) if spec.scale is Scale.RESPONSE else native
    if isinstance(reference, Design):
        ref_value = criterion_value(reference, criterion, model, th)
    elif reference is None:
        ref_value = optimum(model, th, criterion).value
    else:
        ref_value = float(reference)
    name = criterion_name(criterion, model)
    return DesignReport(
        model=model.name,
        theta=tuple(float(t) for t in th),
        criterion=name,
        value=value,
        design_response=resp,
        design_dose=dose,
        certificate={"type": "NONE"},
        ratio=r_star,
        efficiencies={name: ref_value / value},
        extras={"family": spec.family.value, "scale": spec.scale.value, "n": spec.n,
                "reference_value": ref_value},
    )
