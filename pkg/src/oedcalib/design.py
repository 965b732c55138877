"""Approximate designs, information matrices and design-scale transforms."""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DomainError, EmptyDesign, ScaleError, SingularDesign
from .model import DOMAIN_SLACK, CalibrationModel, RegressorMode
from .numerics import Interval

WEIGHT_SUM_SLACK = 1e-6
# sums this close to one are left alone so 12-digit serialized weights reload unchanged
WEIGHT_SUM_EXACT = 1e-10


class Scale(enum.Enum):
    RESPONSE = "response"
    DOSE = "dose"

    @classmethod
    def parse(cls, value: "str | Scale") -> "Scale":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {"netod": "response", "y": "response", "x": "dose"}
        key = aliases.get(key, key)
        return cls(key)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float).reshape(-1)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Design:
    """Finite probability measure on one scale.

    Weights are renormalised when they sum to one within ``1e-6`` (reported
    decimals rarely add up exactly); anything further off is rejected.
    """

    scale: Scale
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scale", Scale.parse(self.scale))
        pts = np.array(self.points, dtype=float).reshape(-1)
        wts = np.array(self.weights, dtype=float).reshape(-1)
        if pts.size == 0:
            raise EmptyDesign("design has no support points")
        if pts.shape != wts.shape:
            raise ValueError("points and weights differ in length")
        if not (np.all(np.isfinite(pts)) and np.all(np.isfinite(wts))):
            raise ValueError("design contains non-finite values")
        if np.any(wts < -1e-15):
            raise ValueError(f"negative weight in {wts}")
        wts = np.clip(wts, 0.0, None)
        total = wts.sum()
        if abs(total - 1.0) > WEIGHT_SUM_SLACK:
            raise ValueError(f"weights sum to {total!r}, not 1")
        if abs(total - 1.0) > WEIGHT_SUM_EXACT:
            wts = wts / total
        if np.any(np.diff(pts) <= 0):
            raise ValueError(f"support points must be strictly increasing: {pts}")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(wts))

    @classmethod
    def from_unsorted(cls, scale, points, weights) -> "Design":
        """Sort the support and pool exactly repeated points."""
        pts = np.asarray(points, dtype=float).reshape(-1)
        wts = np.asarray(weights, dtype=float).reshape(-1)
        uniq, inv = np.unique(pts, return_inverse=True)
        pooled = np.zeros(uniq.shape)
        np.add.at(pooled, inv, wts)
        return cls(scale, uniq, pooled)

    @classmethod
    def uniform(cls, scale, points) -> "Design":
        pts = np.asarray(points, dtype=float).reshape(-1)
        return cls.from_unsorted(scale, pts, np.full(pts.shape, 1.0 / pts.size))

    @property
    def k(self) -> int:
        return int(self.points.size)

    def pairs(self) -> list[tuple[float, float]]:
        return [(float(p), float(w)) for p, w in zip(self.points, self.weights)]

    def __repr__(self):
        body = ", ".join(f"{p:.4g}:{w:.4g}" for p, w in self.pairs())
        return f"Design({self.scale.value}; {body})"


@dataclass(frozen=True, eq=False)
class InformationMatrix:
    matrix: np.ndarray
    mode: RegressorMode
    theta: tuple[float, ...]

    @property
    def m(self) -> int:
        return int(self.matrix.shape[0])


def _require(design: Design, scale: Scale, what: str):
    if design.scale is not scale:
        raise ScaleError(f"{what} needs a {scale.value}-scale design, got {design.scale.value}")


def check_support(design: Design, model: CalibrationModel, theta=None) -> None:
    space = model.response_space if design.scale is Scale.RESPONSE else model.dose_image(theta)
    if not np.all(space.contains(design.points, DOMAIN_SLACK * max(1.0, space.length))):
        raise DomainError(f"support {design.points} leaves [{space.lo}, {space.hi}]")


def fim(design: Design, model: CalibrationModel, theta=None, mode=RegressorMode.CALIBRATION) -> InformationMatrix:
    """``sum_i w_i f(y_i) f(y_i)^T`` on the response scale."""
    _require(design, Scale.RESPONSE, "fim")
    mode = RegressorMode.parse(mode)
    th = model.theta(theta)
    F = np.ascontiguousarray(model.regressor(design.points, th, mode))
    M = _kernels.weighted_gram(F, np.ascontiguousarray(design.weights))
    return InformationMatrix(M, mode, tuple(float(t) for t in th))


def transform_design(design: Design, model: CalibrationModel, theta=None) -> Design:
    """Response-scale design mapped through ``mu``; weights are untouched."""
    _require(design, Scale.RESPONSE, "transform_design")
    return Design(Scale.DOSE, np.atleast_1d(model.mu(design.points, theta)), design.weights)


def inverse_transform(design: Design, model: CalibrationModel, theta=None) -> Design:
    _require(design, Scale.DOSE, "inverse_transform")
    return Design(Scale.RESPONSE, np.atleast_1d(model.eta(design.points, theta)), design.weights)


def to_response(design: Design, model: CalibrationModel, theta=None) -> Design:
    if design.scale is Scale.RESPONSE:
        return design
    return inverse_transform(design, model, theta)


def merge_support(
    design: Design,
    point_tol: float | None = None,
    weight_tol: float = 1e-6,
    space: Interval | None = None,
    location: str = "mean",
) -> Design:
    """Pool points closer than ``point_tol`` and drop negligible weights.

    Neighbouring points are chained (single linkage) and replaced by their
    weight-weighted mean, or with ``location="mode"`` by the member carrying
    the most weight. ``point_tol`` defaults to ``1e-4`` of ``space``.
    """
    if location not in ("mean", "mode"):
        raise ValueError(f"unknown cluster location {location!r}")
    if point_tol is None:
        if space is None:
            raise ValueError("give point_tol or the design space")
        point_tol = 1e-4 * space.length
    pts, wts = design.points, design.weights
    groups: list[list[int]] = [[0]]
    for i in range(1, pts.size):
        if pts[i] - pts[i - 1] < point_tol:
            groups[-1].append(i)
        else:
            groups.append([i])
    new_p, new_w = [], []
    for g in groups:
        w = wts[g].sum()
        new_w.append(w)
        if location == "mode":
            new_p.append(pts[g][int(np.argmax(wts[g]))])
        else:
            new_p.append(np.dot(pts[g], wts[g]) / w if w > 0 else pts[g].mean())
    new_p, new_w = np.array(new_p), np.array(new_w)
    keep = new_w >= weight_tol
    if not np.any(keep) or new_w[keep].sum() <= 0:
        raise EmptyDesign("every support point fell below the weight tolerance")
    new_p, new_w = new_p[keep], new_w[keep]
    return Design(design.scale, new_p, new_w / new_w.sum())


def efficiency(design: Design, reference: Design, spec, model: CalibrationModel, theta=None) -> float:
    """Efficiency of ``design`` relative to ``reference`` under ``spec``.

    D-efficiency is the ``1/m`` power of the determinant ratio; every other
    criterion uses ``Phi(reference) / Phi(design)``.
    """
    from .criteria import criterion_value

    ref = criterion_value(reference, spec, model, theta)
    val = criterion_value(design, spec, model, theta)
    if not np.isfinite(val):
        raise SingularDesign(f"design cannot support the {spec.label} criterion")
    eff = ref / val
    if eff > 1.0 + 1e-9:
        warnings.warn(f"design beats its reference under {spec.kind.value}: efficiency {eff:.6f}", stacklevel=2)
    return float(eff)
