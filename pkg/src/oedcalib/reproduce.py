"""Run the reference radiochromic suite and compare it with bundled golden values."""

from __future__ import annotations

import configparser
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, data_path, parse_numbers, parse_weights
from .criteria import CriterionSpec, criterion_value
from .design import Design, to_response, transform_design
from .errors import ConfigError, NumericalError
from .model import CalibrationModel, RegressorMode
from .solvers import (SequenceSpec, optimize_sequence, solve_c_optimal, solve_d_optimal, solve_gi_optimal,
                      solve_vi_optimal)
from .solvers._report import DesignReport
from .solvers.evaluate import criterion_name

log = logging.getLogger(__name__)

GOLDEN_FILE = "golden.ini"


def thread_count() -> int:
    raw = os.environ.get("OED_CALIB_THREADS", "").strip()
    if not raw:
        return min(4, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"OED_CALIB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"OED_CALIB_THREADS must be a positive integer, got {raw!r}")
    return n


@dataclass(frozen=True)
class GoldenCheck:
    name: str
    kind: str
    target: str
    values: dict = field(default_factory=dict)


def load_golden(path: str | Path | None = None) -> list[GoldenCheck]:
    path = Path(path) if path is not None else data_path(GOLDEN_FILE)
    cp = configparser.ConfigParser(inline_comment_prefixes=(";",))
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read golden file {path}: {exc.strerror}") from None
    checks = []
    for sec in cp.sections():
        s = cp[sec]
        kind = s.get("kind", "").strip()
        if kind not in ("design", "efficiency", "ratio"):
            raise ConfigError(f"[{sec}] kind: expected design, efficiency or ratio")
        vals: dict = {}
        if kind == "design":
            pts = parse_numbers(s["points"], f"[{sec}] points")
            vals["points"] = pts
            vals["weights"] = parse_weights(s["weights"], len(pts), f"[{sec}] weights")
            if "dose" in s:
                vals["dose"] = parse_numbers(s["dose"], f"[{sec}] dose")
            for key in ("point_tol", "weight_tol", "dose_tol"):
                if key in s:
                    vals[key] = float(s[key])
            target = s["solver"].strip()
        elif kind == "efficiency":
            target = s["design"].strip()
            vals["criterion"] = s["criterion"].strip()
            vals["value"], vals["tol"] = float(s["value"]), float(s["tol"])
        else:
            target = s["solver"].strip()
            for key in ("value", "tol", "efficiency", "efficiency_tol"):
                if key in s:
                    vals[key] = float(s[key])
        checks.append(GoldenCheck(sec, kind, target, vals))
    return checks


@dataclass
class SuiteResult:
    reports: dict[str, DesignReport]
    practice: Design | None
    optima: dict[str, float]
    errors: dict[str, str]


def _unit(model: CalibrationModel, name: str) -> np.ndarray:
    return np.eye(model.m)[list(model.param_names).index(name)]


def base_jobs(model: CalibrationModel, cfg: ScenarioConfig) -> dict:
    th = model.theta0
    jobs = {
        "d-opt": lambda: solve_d_optimal(model, th, starts=cfg.starts),
        "d-opt-naive": lambda: solve_d_optimal(model, th, RegressorMode.NAIVE_INVERSE, starts=cfg.starts),
        "gi-opt": lambda: solve_gi_optimal(model, th, cfg.wynn),
        "vi-opt": lambda: solve_vi_optimal(model, th, cfg.wynn),
    }
    for p in model.param_names:
        jobs[f"c-opt-{p}"] = (lambda c: lambda: solve_c_optimal(
            model, th, c, starts=cfg.starts, n_random=cfg.n_random, seed=cfg.seed))(_unit(model, p))
    return jobs


def run_suite(model: CalibrationModel, cfg: ScenarioConfig, threads: int | None = None) -> SuiteResult:
    """Solve every optimum, then the sequences against them."""
    threads = threads or thread_count()
    reports: dict[str, DesignReport] = {}
    errors: dict[str, str] = {}

    def run(jobs):
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futs = {k: pool.submit(f) for k, f in jobs.items()}
            for k, fut in futs.items():
                try:
                    reports[k] = fut.result()
                except NumericalError as exc:
                    errors[k] = f"{type(exc).__name__}: {exc}"
                    log.error("%s failed: %s", k, errors[k])

    run(base_jobs(model, cfg))
    optima = {}
    for key, spec in [("d-opt", CriterionSpec.d()), ("gi-opt", CriterionSpec.gi()), ("vi-opt", CriterionSpec.vi())]:
        if key in reports:
            optima[criterion_name(spec, model)] = reports[key].value
    for p in model.param_names:
        if f"c-opt-{p}" in reports:
            optima[f"c_{p}"] = reports[f"c-opt-{p}"].value

    seq_jobs = {}
    for cname, spec in (("d", CriterionSpec.d()), ("gi", CriterionSpec.gi()), ("vi", CriterionSpec.vi())):
        ref = optima.get(spec.label)
        if ref is None:
            continue
        for fam in ("arithmetic", "geometric"):
            sspec = SequenceSpec(fam, cfg.sequence.scale, cfg.sequence.n)
            seq_jobs[f"seq-{cname}-{fam}"] = (lambda s, c, r: lambda: optimize_sequence(
                model, model.theta0, s, c, reference=r))(sspec, spec, ref)
    run(seq_jobs)
    return SuiteResult(reports, cfg.evaluate, optima, errors)


def _spec_for(name: str, model: CalibrationModel) -> CriterionSpec:
    if name.startswith("c_"):
        return CriterionSpec.c_vector(_unit(model, name[2:]))
    return CriterionSpec(name)


@dataclass
class Comparison:
    name: str
    passed: bool
    expected: str
    observed: str


def _fmt(v) -> str:
    return ", ".join(f"{x:.4g}" for x in v)


def _design_check(chk: GoldenCheck, rep: DesignReport) -> Comparison:
    v = chk.values
    resp = rep.design_response
    exp = f"{{{_fmt(v['points'])}; {_fmt(v['weights'])}}}"
    obs = f"{{{_fmt(resp.points)}; {_fmt(resp.weights)}}}"
    ok = resp.k == len(v["points"])
    if ok:
        ok = bool(np.all(np.abs(resp.points - v["points"]) <= v.get("point_tol", 0.01) + 1e-12))
        ok &= bool(np.all(np.abs(resp.weights - v["weights"]) <= v.get("weight_tol", 0.02) + 1e-12))
        if "dose" in v:
            ok &= bool(np.all(np.abs(rep.design_dose.points - v["dose"]) <= v.get("dose_tol", 0.05) + 1e-12))
            exp += f" dose {{{_fmt(v['dose'])}}}"
            obs += f" dose {{{_fmt(rep.design_dose.points)}}}"
    return Comparison(chk.name, ok, exp, obs)


def compare(checks: list[GoldenCheck], suite: SuiteResult, model: CalibrationModel) -> list[Comparison]:
    th = model.theta0
    out = []
    for chk in checks:
        v = chk.values
        try:
            if chk.kind == "design":
                rep = suite.reports.get(chk.target)
                if rep is None:
                    raise LookupError(suite.errors.get(chk.target, f"no result for {chk.target}"))
                out.append(_design_check(chk, rep))
            elif chk.kind == "efficiency":
                if chk.target == "practice":
                    if suite.practice is None:
                        raise LookupError("scenario has no [evaluate] design")
                    design = to_response(suite.practice, model, th)
                else:
                    rep = suite.reports.get(chk.target)
                    if rep is None:
                        raise LookupError(suite.errors.get(chk.target, f"no result for {chk.target}"))
                    design = rep.design_response
                spec = _spec_for(v["criterion"], model)
                ref = suite.optima[v["criterion"]]
                eff = ref / criterion_value(design, spec, model, th)
                ok = abs(eff - v["value"]) <= v["tol"] + 1e-12
                out.append(Comparison(chk.name, ok, f"{v['value']:.4g} +- {v['tol']:g}", f"{eff:.4g}"))
            else:
                rep = suite.reports.get(chk.target)
                if rep is None:
                    raise LookupError(suite.errors.get(chk.target, f"no result for {chk.target}"))
                ok, exp, obs = True, [], []
                if "value" in v:
                    ok &= abs(rep.ratio - v["value"]) <= v["tol"] + 1e-12
                    exp.append(f"r* {v['value']:.4g} +- {v['tol']:g}")
                    obs.append(f"r* {rep.ratio:.4g}")
                if "efficiency" in v:
                    eff = next(iter(rep.efficiencies.values()))
                    ok &= abs(eff - v["efficiency"]) <= v["efficiency_tol"] + 1e-12
                    exp.append(f"eff {v['efficiency']:.4g} +- {v['efficiency_tol']:g}")
                    obs.append(f"eff {eff:.4g}")
                out.append(Comparison(chk.name, bool(ok), ", ".join(exp), ", ".join(obs)))
        except (LookupError, NumericalError) as exc:
            out.append(Comparison(chk.name, False, "result", f"unavailable: {exc}"))
    return out


def render_comparison(rows: list[Comparison]) -> str:
    w = [max(len(getattr(r, a)) for r in rows) if rows else 4 for a in ("name", "expected")]
    lines = [f"{'check':<{w[0]}}  {'status':<6}  {'expected':<{w[1]}}  observed"]
    for r in rows:
        lines.append(f"{r.name:<{w[0]}}  {'PASS' if r.passed else 'FAIL':<6}  {r.expected:<{w[1]}}  {r.observed}")
    n_fail = sum(not r.passed for r in rows)
    lines.append(f"{len(rows) - n_fail} passed, {n_fail} failed")
    return "\n".join(lines) + "\n"


def suite_rows(suite: SuiteResult, model: CalibrationModel):
    """Table rows in reference-table order, practice design last."""
    th = model.theta0
    order = ["d-opt", "d-opt-naive", *[f"c-opt-{p}" for p in model.param_names], "gi-opt", "vi-opt",
             "seq-d-arithmetic", "seq-d-geometric", "seq-gi-arithmetic", "seq-gi-geometric",
             "seq-vi-arithmetic", "seq-vi-geometric"]
    rows = []
    d_ref = suite.optima.get("D")
    for key in order:
        rep = suite.reports.get(key)
        if rep is None:
            continue
        if key.startswith("seq-"):
            eff = next(iter(rep.efficiencies.values()))
        elif key.startswith("c-opt-") and "d-opt" in suite.reports:
            p = key[len("c-opt-"):]
            eff = rep.value / criterion_value(suite.reports["d-opt"].design_response,
                                              _spec_for(f"c_{p}", model), model, th)
        elif d_ref is not None:
            eff = d_ref / criterion_value(rep.design_response, CriterionSpec.d(), model, th)
        else:
            eff = None
        rows.append((key, rep.design_response, rep.design_dose, eff))
    if suite.practice is not None:
        resp = to_response(suite.practice, model, th)
        eff = d_ref / criterion_value(resp, CriterionSpec.d(), model, th) if d_ref else None
        rows.append(("practice", resp, transform_design(resp, model, th), eff))
    return rows
