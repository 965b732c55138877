"""``oed-calib`` command-line front end.

Exit codes: 0 success, 1 configuration error, 2 solver did not converge
(artifacts are still written), 3 numerical failure, 4 golden comparison
mismatch in ``reproduce-paper``.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, load_config, parse_numbers
from .criteria import CriterionSpec, Kind, frechet_derivative, var_inverse_prediction
from .design import Design, to_response
from .errors import CertificationFailed, ConfigError, DomainError, NumericalError, TargetOutOfRange
from .model import RegressorMode
from .report import (FORMATS, dumps, emit_report, load_design, render, render_curve_csv, render_table,
                     report_to_dict)
from .reproduce import compare, load_golden, render_comparison, run_suite, suite_rows, thread_count
from .solvers import (SequenceSpec, evaluate_fixed_design, optimize_sequence, optimum, solve_c_optimal,
                      solve_d_optimal, solve_gi_optimal, solve_vi_optimal)
from .solvers.evaluate import default_criteria

log = logging.getLogger("oedcalib")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_CONVERGED, EXIT_NUMERICAL, EXIT_GOLDEN = 0, 1, 2, 3, 4
SENSITIVITY_GRID = 2001


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="scenario INI file (default: bundled radiochromic scenario)")
    p.add_argument("--out", help="output directory (default: [output] dir of the scenario)")
    p.add_argument("--format", choices=FORMATS, default="text", help="format printed to stdout")
    p.add_argument("--seed", type=int, help="seed for the random-design check")
    p.add_argument("--verbose", "-v", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oed-calib", description="Optimal designs for calibration models.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("d-opt", help="D-optimal design")
    _common(p)
    p.add_argument("--mode", choices=[m.value for m in RegressorMode], help="regressor construction")

    p = sub.add_parser("c-opt", help="c-optimal design")
    _common(p)
    p.add_argument("--c", help="combination vector, e.g. '0,0,1' (default: [criterion] c)")

    for verb, what in (("gi-opt", "G_I"), ("vi-opt", "V_I")):
        p = sub.add_parser(verb, help=f"{what}-optimal design by Wynn iteration")
        _common(p)
        p.add_argument("--step", choices=["harmonic", "line-search"])

    p = sub.add_parser("sequence", help="ratio-optimised arithmetic or geometric sequence")
    _common(p)
    p.add_argument("--family", choices=["arithmetic", "geometric"])
    p.add_argument("--scale", choices=["response", "dose"])
    p.add_argument("--n", type=int)
    p.add_argument("--criterion", help="D, GI, VI or C (default: [criterion] kind)")

    p = sub.add_parser("evaluate", help="criterion values and efficiencies of a fixed design")
    _common(p)
    p.add_argument("--design", help="design or report JSON (default: [evaluate] section)")

    p = sub.add_parser("sensitivity", help="sensitivity function of a design on a grid, as CSV")
    _common(p)
    p.add_argument("--design", help="design or report JSON (default: optimum of [criterion])")
    p.add_argument("--grid", type=int, default=SENSITIVITY_GRID)

    p = sub.add_parser("invert", help="map dose values to response values")
    _common(p)
    p.add_argument("doses", nargs="+", type=float)

    p = sub.add_parser("reproduce-paper", help="run the reference suite and compare with golden values")
    _common(p)
    p.add_argument("--golden", help="golden INI file (default: bundled)")
    return parser


def _scenario_echo(cfg: ScenarioConfig, model, criterion: str | None = None) -> dict:
    out = {
        "model": model.name,
        "theta": list(model.theta0),
        "response_space": list(model.response_space.as_tuple()),
        "dose_space": list(model.dose_space.as_tuple()),
        "seed": cfg.seed,
    }
    if criterion is not None:
        out["criterion"] = criterion
    return out


def _out_dir(args, cfg: ScenarioConfig) -> Path:
    return Path(args.out or cfg.out_dir)


def _emit(obj, args, cfg, stem: str, scenario: dict) -> None:
    fmts = ["json", "text"] + (["csv"] if args.format == "csv" else [])
    paths = emit_report(obj, _out_dir(args, cfg), stem, fmts, scenario)
    sys.stdout.write(render(obj, args.format, scenario))
    log.info("wrote %s", ", ".join(str(p) for p in paths))


def _criterion(cfg: ScenarioConfig, override: str | None, c_text: str | None = None) -> CriterionSpec:
    spec = cfg.criterion
    if override is None and c_text is None:
        return spec
    try:
        kind = Kind.parse(override) if override is not None else spec.kind
    except ValueError:
        raise ConfigError(f"--criterion: unknown criterion {override!r}") from None
    c = spec.c
    if c_text is not None:
        c = tuple(parse_numbers(c_text, "--c"))
    if kind is Kind.C and c is None:
        c = (0.0, 0.0, 1.0)
    try:
        return CriterionSpec(kind, c=c if kind is Kind.C else None, nodes=spec.nodes, grid=spec.grid,
                             mode=spec.mode)
    except ValueError as exc:
        raise ConfigError(f"criterion: {exc}") from None


def _cmd_d(args, cfg, model):
    mode = RegressorMode.parse(args.mode) if args.mode else cfg.criterion.mode
    try:
        rep = solve_d_optimal(model, None, mode, starts=cfg.starts)
    except CertificationFailed as exc:
        log.error("%s", exc)
        return EXIT_NOT_CONVERGED
    _emit(rep, args, cfg, "d-opt", _scenario_echo(cfg, model, rep.criterion))
    return EXIT_OK


def _cmd_c(args, cfg, model):
    spec = _criterion(cfg, "C", args.c)
    if len(spec.c) != model.m:
        raise ConfigError(f"c: expected {model.m} components, got {len(spec.c)}")
    rep = solve_c_optimal(model, None, spec.c, starts=cfg.starts, n_random=cfg.n_random, seed=cfg.seed)
    _emit(rep, args, cfg, "c-opt", _scenario_echo(cfg, model, rep.criterion))
    return EXIT_OK


def _cmd_wynn(args, cfg, model):
    from dataclasses import replace

    wc = replace(cfg.wynn, step=args.step) if args.step else cfg.wynn
    solver = solve_gi_optimal if args.verb == "gi-opt" else solve_vi_optimal
    rep = solver(model, None, wc)
    _emit(rep, args, cfg, args.verb, _scenario_echo(cfg, model, rep.criterion))
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def _cmd_sequence(args, cfg, model):
    base = cfg.sequence
    try:
        spec = SequenceSpec(args.family or base.family, args.scale or base.scale, args.n or base.n)
    except ValueError as exc:
        raise ConfigError(f"sequence: {exc}") from None
    crit = _criterion(cfg, args.criterion)
    rep = optimize_sequence(model, None, spec, crit)
    stem = f"sequence-{spec.family.value}-{spec.scale.value}-{crit.label}"
    _emit(rep, args, cfg, stem, _scenario_echo(cfg, model, rep.criterion))
    return EXIT_OK


def _load_design(path: str | None, cfg: ScenarioConfig) -> Design | None:
    if path is None:
        return cfg.evaluate
    try:
        return load_design(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"--design: {exc}") from None


def _criteria_list(cfg, model):
    specs = default_criteria(model)
    if cfg.evaluate_criteria is None:
        return specs
    from .solvers.evaluate import criterion_name

    by_name = {criterion_name(s, model): s for s in specs}
    out = []
    for name in cfg.evaluate_criteria:
        if name not in by_name:
            raise ConfigError(f"[evaluate] criteria: unknown criterion {name!r}; known: {sorted(by_name)}")
        out.append(by_name[name])
    return out


def _cmd_evaluate(args, cfg, model):
    design = _load_design(args.design, cfg)
    if design is None:
        raise ConfigError("[evaluate] points: no design given (use --design or an [evaluate] section)")
    ev = evaluate_fixed_design(design, model, None, _criteria_list(cfg, model))
    _emit(ev, args, cfg, "evaluate", _scenario_echo(cfg, model))
    return EXIT_OK


def _cmd_sensitivity(args, cfg, model):
    spec = cfg.criterion
    design = _load_design(args.design, cfg) if args.design else optimum(model, None, spec).design_response
    design = to_response(design, model)
    ys = model.response_space.linspace(args.grid)
    if spec.kind is Kind.GI:
        cols = {"y": ys, "variance": var_inverse_prediction(ys, design, model)}
    else:
        cols = {"y": ys, "psi": frechet_derivative(ys, design, spec, model)}
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    text = render_curve_csv(cols)
    (out / f"sensitivity-{spec.label}.csv").write_text(text, encoding="utf-8")
    if args.format == "csv":
        sys.stdout.write(text)
    else:
        k = int(np.argmin(cols[list(cols)[1]]))
        sys.stdout.write(f"{spec.label} sensitivity on {args.grid} points; minimum {cols[list(cols)[1]][k]:.6g} "
                         f"at y = {ys[k]:.6g}\n")
    return EXIT_OK


def _cmd_invert(args, cfg, model):
    try:
        ys = model.eta(np.asarray(args.doses, dtype=float))
    except (DomainError, TargetOutOfRange) as exc:
        raise ConfigError(f"doses: outside the dose image of the response space ({exc})") from None
    ys = np.atleast_1d(ys)
    if args.format == "json":
        sys.stdout.write(dumps({"dose": list(args.doses), "response": ys}))
    elif args.format == "csv":
        sys.stdout.write(render_curve_csv({"dose": np.asarray(args.doses), "response": ys}))
    else:
        for x, y in zip(args.doses, ys):
            sys.stdout.write(f"{x:.6g} -> {y:.10g}\n")
    return EXIT_OK


def _cmd_reproduce(args, cfg, model):
    checks = load_golden(args.golden)
    suite = run_suite(model, cfg, thread_count())
    rows = compare(checks, suite, model)
    table = render_table(suite_rows(suite, model), title="Optimal designs")
    comparison = render_comparison(rows)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    scenario = _scenario_echo(cfg, model)
    payload = {
        "scenario": scenario,
        "designs": {k: report_to_dict(r) for k, r in sorted(suite.reports.items())},
        "errors": suite.errors,
        "comparison": [{"check": r.name, "passed": r.passed, "expected": r.expected, "observed": r.observed}
                       for r in rows],
    }
    (out / "reproduce.json").write_text(dumps(payload), encoding="utf-8")
    (out / "reproduce.txt").write_text(table + "\n" + comparison, encoding="utf-8")
    if args.format == "json":
        sys.stdout.write(dumps(payload))
    else:
        sys.stdout.write(table + "\n" + comparison)
    if suite.errors:
        return EXIT_NUMERICAL
    return EXIT_OK if all(r.passed for r in rows) else EXIT_GOLDEN


COMMANDS = {
    "d-opt": _cmd_d,
    "c-opt": _cmd_c,
    "gi-opt": _cmd_wynn,
    "vi-opt": _cmd_wynn,
    "sequence": _cmd_sequence,
    "evaluate": _cmd_evaluate,
    "sensitivity": _cmd_sensitivity,
    "invert": _cmd_invert,
    "reproduce-paper": _cmd_reproduce,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_seed(args.seed)
        model = cfg.build_model()
        return COMMANDS[args.verb](args, cfg, model)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
