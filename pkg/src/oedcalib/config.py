"""Scenario files: INI sections ``[model]``, ``[criterion]``, ``[solver]``,
``[sequence]``, ``[evaluate]`` and ``[output]``.

Every key is optional; missing ones fall back to the bundled radiochromic
scenario. Errors raise ``ConfigError`` naming the offending ``[section] key``.
"""

from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .criteria import CriterionSpec, Kind
from .design import Design, Scale
from .errors import ConfigError
from .model import MODELS, CalibrationModel, RegressorMode, get_model
from .solvers.copt import DEFAULT_SEED
from .solvers.sequences import Family, SequenceSpec
from .solvers.wynn import WynnConfig

log = logging.getLogger(__name__)

DEFAULT_SCENARIO = "radiochromic.ini"
SPACE_RTOL = 1e-2


def data_path(name: str) -> Path:
    return Path(str(resources.files("oedcalib") / "data" / name))


def parse_numbers(text: str, where: str) -> list[float]:
    """Comma/space separated numbers, fractions like ``1/3``, or ``start:step:stop`` ranges."""
    text = text.strip()
    try:
        if text.count(":") == 2:
            start, step, stop = (float(Fraction(p.strip())) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError("range needs a positive step and stop >= start")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [start + i * step for i in range(n)]
        return [float(Fraction(p)) for p in text.replace(",", " ").split()]
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: cannot parse numbers from {text!r} ({exc})") from None


def parse_weights(text: str, k: int, where: str) -> list[float]:
    """Weights for ``k`` points; a single missing last weight is ``1 - sum`` of the rest."""
    parts = [p for p in text.replace(",", " ").split()]
    try:
        fr = [Fraction(p) for p in parts]
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{where}: cannot parse weights from {text!r}") from None
    if len(fr) == k - 1:
        fr.append(1 - sum(fr))
    if len(fr) != k:
        raise ConfigError(f"{where}: expected {k} weights, got {len(fr)}")
    return [float(f) for f in fr]


def _interval(text: str, where: str) -> tuple[float, float]:
    v = parse_numbers(text, where)
    if len(v) != 2 or not v[0] < v[1]:
        raise ConfigError(f"{where}: expected 'lo, hi' with lo < hi")
    return v[0], v[1]


@dataclass(frozen=True)
class ScenarioConfig:
    model_name: str = "radiochromic-ebt3"
    theta: tuple[float, ...] | None = None
    response_space: tuple[float, float] | None = None
    dose_space: tuple[float, float] | None = None
    criterion: CriterionSpec = field(default_factory=CriterionSpec.d)
    starts: int = 32
    n_random: int = 2000
    wynn: WynnConfig = field(default_factory=WynnConfig)
    sequence: SequenceSpec = field(default_factory=lambda: SequenceSpec(Family.ARITHMETIC))
    evaluate: Design | None = None
    evaluate_criteria: tuple[str, ...] | None = None
    out_dir: str = "oed-results"
    seed: int = DEFAULT_SEED
    source: str | None = None

    def build_model(self) -> CalibrationModel:
        if self.theta is not None:
            try:
                get_model(self.model_name).check_theta(self.theta)
            except KeyError as exc:
                raise ConfigError(f"[model] name: {exc.args[0]}") from None
            except ValueError as exc:
                raise ConfigError(f"[model] theta: {exc}") from None
        try:
            model = get_model(self.model_name, theta=self.theta, response_space=self.response_space,
                              dose_space=self.dose_space)
        except KeyError as exc:
            raise ConfigError(f"[model] name: {exc.args[0]}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[model]: {exc}") from None
        try:
            model.check_theta(model.theta0)
        except ValueError as exc:
            raise ConfigError(f"[model] theta: {exc}") from None
        hi = float(model.mu(model.response_space.hi))
        if abs(hi - model.dose_space.hi) > SPACE_RTOL * abs(model.dose_space.hi):
            log.warning("mu(%g) = %g does not match the dose upper bound %g",
                        model.response_space.hi, hi, model.dose_space.hi)
        return model

    def with_seed(self, seed: int | None) -> "ScenarioConfig":
        return self if seed is None else replace(self, seed=int(seed))


def _get(cp, section, key, conv, default, where=None):
    if not cp.has_option(section, key):
        return default
    raw = cp.get(section, key)
    where = where or f"[{section}] {key}"
    try:
        return conv(raw)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _criterion(cp) -> CriterionSpec:
    s = "criterion"
    kind = _get(cp, s, "kind", lambda v: Kind.parse(v.strip()), Kind.D)
    c = _get(cp, s, "c", lambda v: tuple(parse_numbers(v, f"[{s}] c")), None)
    mode = _get(cp, s, "mode", RegressorMode.parse, RegressorMode.CALIBRATION)
    nodes = _get(cp, s, "nodes", int, 64)
    grid = _get(cp, s, "grid", int, 2000)
    if kind is Kind.C and c is None:
        c = (0.0, 0.0, 1.0)
    try:
        return CriterionSpec(kind, c=c if kind is Kind.C else None, nodes=nodes, grid=grid, mode=mode)
    except ValueError as exc:
        raise ConfigError(f"[criterion]: {exc}") from None


def _wynn(cp) -> WynnConfig:
    s = "solver"
    kw = {}
    for key, conv in (("step", str.strip), ("delta", float), ("max_iter", int), ("grid", int),
                      ("window", int), ("stall_rtol", float), ("refresh", int), ("point_tol", float),
                      ("weight_tol", float), ("polish", _bool), ("strict", _bool)):
        if cp.has_option(s, key):
            kw[key] = _get(cp, s, key, conv, None)
    if cp.has_option(s, "nodes"):
        kw["nodes"] = _get(cp, s, "nodes", int, None)
    try:
        return WynnConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"[solver]: {exc}") from None


def _bool(v: str) -> bool:
    key = v.strip().lower()
    if key in ("1", "true", "yes", "on"):
        return True
    if key in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _sequence(cp) -> SequenceSpec:
    s = "sequence"
    try:
        return SequenceSpec(
            family=_get(cp, s, "family", Family.parse, Family.ARITHMETIC),
            scale=_get(cp, s, "scale", Scale.parse, Scale.RESPONSE),
            n=_get(cp, s, "n", int, 6),
            r=_get(cp, s, "r", float, None),
        )
    except ValueError as exc:
        raise ConfigError(f"[sequence]: {exc}") from None


def _evaluate(cp) -> Design | None:
    s = "evaluate"
    if not cp.has_option(s, "points"):
        return None
    pts = parse_numbers(cp.get(s, "points"), f"[{s}] points")
    scale = _get(cp, s, "scale", Scale.parse, Scale.RESPONSE)
    if cp.has_option(s, "weights"):
        w = parse_weights(cp.get(s, "weights"), len(pts), f"[{s}] weights")
    else:
        w = [1.0 / len(pts)] * len(pts)
    try:
        return Design.from_unsorted(scale, np.array(pts), np.array(w))
    except ValueError as exc:
        raise ConfigError(f"[{s}] points/weights: {exc}") from None


def load_config(path: str | Path | None = None) -> ScenarioConfig:
    """Read a scenario file; ``None`` loads the bundled default."""
    path = Path(path) if path is not None else data_path(DEFAULT_SCENARIO)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from None
    known = {"model", "criterion", "solver", "sequence", "evaluate", "output"}
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"[{sec}]: unknown section (expected one of {sorted(known)})")
    name = _get(cp, "model", "name", str.strip, "radiochromic-ebt3")
    if name not in MODELS:
        raise ConfigError(f"[model] name: unknown model {name!r}; known: {sorted(MODELS)}")
    ev_crit = _get(cp, "evaluate", "criteria",
                   lambda v: tuple(p.strip() for p in v.split(",") if p.strip()), None)
    return ScenarioConfig(
        model_name=name,
        theta=_get(cp, "model", "theta", lambda v: tuple(parse_numbers(v, "[model] theta")), None),
        response_space=_get(cp, "model", "response_space", lambda v: _interval(v, "[model] response_space"), None),
        dose_space=_get(cp, "model", "dose_space", lambda v: _interval(v, "[model] dose_space"), None),
        criterion=_criterion(cp),
        starts=_get(cp, "solver", "starts", int, 32),
        n_random=_get(cp, "solver", "n_random", int, 2000),
        wynn=_wynn(cp),
        sequence=_sequence(cp),
        evaluate=_evaluate(cp),
        evaluate_criteria=ev_crit,
        out_dir=_get(cp, "output", "dir", str.strip, "oed-results"),
        seed=_get(cp, "output", "seed", int, DEFAULT_SEED),
        source=str(path),
    )
