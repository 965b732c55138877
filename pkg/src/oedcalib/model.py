"""Calibration models described by their closed-form inverse mean.

The response ``y`` (e.g. net optical density) is observed with constant
variance; the explanatory variable ``x`` (e.g. dose) is recovered through the
known inverse ``x = mu(y, theta)``. Designs are built on the response scale
with the transformed regressor ``f(y) = -(dmu/dy)^-1 dmu/dtheta``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .errors import DomainError, SingularWeight
from .numerics import Interval, invert_monotone

DOMAIN_SLACK = 1e-12


class RegressorMode(enum.Enum):
    CALIBRATION = "calibration"
    # treats mu as if it were the forward mean: the homoscedastic "wrong way"
    NAIVE_INVERSE = "naive-inverse"

    @classmethod
    def parse(cls, value: "str | RegressorMode") -> "RegressorMode":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for mode in cls:
            if mode.value == key:
                return mode
        raise ValueError(f"unknown regressor mode {value!r}")


GradFn = Callable[[np.ndarray, np.ndarray], "tuple[np.ndarray, np.ndarray]"]


@dataclass(frozen=True, eq=False)
class CalibrationModel:
    """Inverse mean ``mu(y, theta)`` with analytic derivatives.

    ``mu_fn(y, theta)`` must accept arrays; ``grad_fn(y, theta)`` returns
    ``(dmu_dtheta, dmu_dy)`` with shapes ``y.shape + (m,)`` and ``y.shape``.
    """

    name: str
    param_names: tuple[str, ...]
    theta0: tuple[float, ...]
    response_space: Interval
    dose_space: Interval
    mu_fn: Callable[[np.ndarray, np.ndarray], np.ndarray] = field(repr=False)
    grad_fn: GradFn = field(repr=False)
    admissible: Callable[[np.ndarray], bool] | None = field(default=None, repr=False)

    def __post_init__(self):
        if len(self.param_names) != len(self.theta0):
            raise ValueError("param_names and theta0 differ in length")
        self.check_theta(self.theta0)

    @property
    def m(self) -> int:
        return len(self.theta0)

    def theta(self, theta=None) -> np.ndarray:
        th = np.asarray(self.theta0 if theta is None else theta, dtype=float)
        if th.shape != (self.m,):
            raise ValueError(f"{self.name} takes {self.m} parameters, got shape {th.shape}")
        return th

    def check_theta(self, theta) -> np.ndarray:
        th = np.asarray(theta, dtype=float)
        if th.shape != (len(self.param_names),) or not np.all(np.isfinite(th)):
            raise ValueError(f"invalid parameter vector {theta!r}")
        if self.admissible is not None and not self.admissible(th):
            raise ValueError(f"parameter vector {tuple(float(t) for t in th)} is not admissible for {self.name}")
        return th

    def with_theta(self, theta) -> "CalibrationModel":
        """Copy of the model with different nominal values."""
        th = tuple(float(t) for t in self.check_theta(theta))
        return CalibrationModel(
            self.name, self.param_names, th, self.response_space, self.dose_space,
            self.mu_fn, self.grad_fn, self.admissible,
        )

    def _y(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        sp = self.response_space
        if not np.all(sp.contains(y, DOMAIN_SLACK)):
            bad = y[~sp.contains(y, DOMAIN_SLACK)] if y.ndim else y
            raise DomainError(f"response value(s) {bad} outside [{sp.lo}, {sp.hi}]")
        return np.clip(y, sp.lo, sp.hi)

    def mu(self, y, theta=None):
        out = self.mu_fn(self._y(y), self.theta(theta))
        return float(out) if np.ndim(out) == 0 else out

    def dmu_dtheta(self, y, theta=None) -> np.ndarray:
        return self.grad_fn(self._y(y), self.theta(theta))[0]

    def dmu_dy(self, y, theta=None):
        out = self.grad_fn(self._y(y), self.theta(theta))[1]
        return float(out) if np.ndim(out) == 0 else out

    def weight(self, y, theta=None):
        """Heteroscedastic weight ``w(y) = dmu/dy``."""
        return self.dmu_dy(y, theta)

    def regressor(self, y, theta=None, mode=RegressorMode.CALIBRATION) -> np.ndarray:
        g, w = self.grad_fn(self._y(y), self.theta(theta))
        if RegressorMode.parse(mode) is RegressorMode.NAIVE_INVERSE:
            return g
        w = np.asarray(w)
        zero_w = w == 0
        if np.any(zero_w & np.any(g != 0, axis=-1)):
            raise SingularWeight("dmu/dy vanishes where dmu/dtheta does not")
        safe = np.where(zero_w, 1.0, w)
        return -g / safe[..., None]

    def dose_image(self, theta=None) -> Interval:
        """Image of the response space under ``mu``."""
        sp = self.response_space
        a, b = self.mu(sp.lo, theta), self.mu(sp.hi, theta)
        return Interval(min(a, b), max(a, b))

    def eta(self, x, theta=None, tol: float = 1e-12):
        """Forward mean: the response ``y`` with ``mu(y, theta) = x``."""
        th = self.theta(theta)
        sp = self.response_space

        def g(y):
            return float(self.mu_fn(np.asarray(y, dtype=float), th))

        def dg(y):
            return float(self.grad_fn(np.asarray(y, dtype=float), th)[1])

        x_arr = np.asarray(x, dtype=float)
        out = np.array([invert_monotone(g, float(v), sp, tol, dg) for v in x_arr.reshape(-1)])
        return float(out[0]) if x_arr.ndim == 0 else out.reshape(x_arr.shape)


# ----------------------------------------------------------------------------
# built-in models


def _radiochromic_mu(y, theta):
    alpha, beta, gamma = theta
    return alpha * y + beta * y**gamma


def _radiochromic_grad(y, theta):
    alpha, beta, gamma = theta
    return _kernels.radiochromic_grad(y, alpha, beta, gamma)


def radiochromic(
    theta=(8.32, 49.91, 2.6),
    response_space=(0.0, 0.45),
    dose_space=(0.0, 10.0),
    name: str = "radiochromic-ebt3",
) -> CalibrationModel:
    """Film dosimetry model ``dose = alpha*netOD + beta*netOD**gamma``."""
    return CalibrationModel(
        name=name,
        param_names=("alpha", "beta", "gamma"),
        theta0=tuple(float(t) for t in theta),
        response_space=Interval(*response_space),
        dose_space=Interval(*dose_space),
        mu_fn=_radiochromic_mu,
        grad_fn=_radiochromic_grad,
        admissible=lambda th: bool(th[0] > 0 and th[1] > 0 and th[2] > 1),
    )


def _linear_mu(y, theta):
    return theta[0] * y


def _linear_grad(y, theta):
    y = np.asarray(y, dtype=float)
    return y[..., None].copy(), np.full_like(y, theta[0])


def linear(theta=(1.0,), response_space=(0.0, 1.0), dose_space=None, name: str = "linear"):
    """One-parameter proportional model ``x = theta*y``."""
    th = float(theta[0])
    if dose_space is None:
        dose_space = (response_space[0] * th, response_space[1] * th)
    return CalibrationModel(
        name=name,
        param_names=("theta",),
        theta0=(th,),
        response_space=Interval(*response_space),
        dose_space=Interval(*dose_space),
        mu_fn=_linear_mu,
        grad_fn=_linear_grad,
        admissible=lambda t: bool(t[0] > 0),
    )


MODELS: dict[str, Callable[..., CalibrationModel]] = {
    "radiochromic-ebt3": radiochromic,
    "linear": linear,
}


def register_model(name: str, factory: Callable[..., CalibrationModel]) -> None:
    if name in MODELS:
        raise ValueError(f"model {name!r} already registered")
    MODELS[name] = factory


def get_model(name: str, **overrides) -> CalibrationModel:
    try:
        factory = MODELS[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {sorted(MODELS)}") from None
    kwargs = {k: v for k, v in overrides.items() if v is not None}
    return factory(**kwargs)
