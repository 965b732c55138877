"""Serialization of solver results: JSON, plain-text tables and CSV.

Floats are written with 12 significant digits and dictionaries keep a fixed
key order, so equal inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .design import Design, Scale
from .solvers._report import DesignReport
from .solvers.evaluate import EvaluationReport

SIG_DIGITS = 12
FORMATS = ("json", "text", "csv")


def sig(x: float) -> float | None:
    """Round to 12 significant digits; non-finite values become ``None``."""
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def clean(obj: Any) -> Any:
    """Recursively convert numpy types and round floats for JSON output."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return sig(obj)
    if isinstance(obj, Design):
        return design_to_dict(obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj: Any) -> str:
    return json.dumps(clean(obj), indent=2, allow_nan=False) + "\n"


def design_to_dict(design: Design) -> dict:
    return {"scale": design.scale.value, "support": [[p, w] for p, w in design.pairs()]}


def design_from_dict(d: dict) -> Design:
    try:
        scale = Scale.parse(d["scale"])
        support = np.asarray(d["support"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"not a design record: {exc}") from None
    if support.ndim != 2 or support.shape[1] != 2:
        raise ValueError("design support must be a list of [point, weight] pairs")
    return Design(scale, support[:, 0], support[:, 1])


def design_to_json(design: Design) -> str:
    return dumps(design_to_dict(design))


def design_from_json(text: str) -> Design:
    return design_from_dict(json.loads(text))


def load_design(path: str | Path, which: str = "response") -> Design:
    """Design from a bare design file or from a report's ``design_<which>`` entry."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if "support" in data:
        return design_from_dict(data)
    key = f"design_{which}"
    if key not in data:
        raise ValueError(f"{path} holds neither a design nor a report with {key}")
    return design_from_dict(data[key])


def report_to_dict(report: DesignReport, scenario: dict | None = None) -> dict:
    out: dict[str, Any] = {}
    if scenario is not None:
        out["scenario"] = scenario
    out["model"] = report.model
    out["theta"] = list(report.theta)
    out["criterion"] = {"name": report.criterion, "value": report.value}
    out["design_response"] = design_to_dict(report.design_response)
    out["design_dose"] = design_to_dict(report.design_dose)
    out["certificate"] = report.certificate
    out["converged"] = report.converged
    out["iterations"] = report.iterations
    if report.ratio is not None:
        out["ratio"] = report.ratio
    out["efficiencies"] = report.efficiencies
    if report.extras:
        out["extras"] = report.extras
    return out


def evaluation_to_dict(ev: EvaluationReport, scenario: dict | None = None) -> dict:
    out: dict[str, Any] = {}
    if scenario is not None:
        out["scenario"] = scenario
    out["model"] = ev.model
    out["theta"] = list(ev.theta)
    out["design_response"] = design_to_dict(ev.design_response)
    out["design_dose"] = design_to_dict(ev.design_dose)
    out["criteria"] = [
        {"name": e.name, "value": e.value, "reference_value": e.reference_value,
         "efficiency": e.efficiency, "error": e.error}
        for e in ev.entries
    ]
    out["efficiencies"] = ev.efficiencies
    return out


# ---------------------------------------------------------------- text


def _weight_text(w: float, k: int) -> str:
    if abs(w - 1.0 / k) < 1e-9:
        return "1" if k == 1 else f"1/{k}"
    return f"{w:.2f}"


def support_text(design: Design, digits: int = 2) -> str:
    """``0.09 (1/3)  0.27 (1/3)  0.45 (1/3)``; weights are omitted for equal-weight sequences over 3 points."""
    k = design.k
    equal = np.allclose(design.weights, 1.0 / k, atol=1e-9)
    if equal and k > 3:
        return "  ".join(f"{p:.{digits}f}" for p in design.points)
    return "  ".join(f"{p:.{digits}f} ({_weight_text(w, k)})" for p, w in design.pairs())


def render_table(rows: Iterable[tuple[str, Design, Design, float | None]], title: str | None = None) -> str:
    """Rows of ``(label, response design, dose design, efficiency)``."""
    rows = list(rows)
    header = ("Design", "netOD support points (weights)", "Dose support points (weights)", "Eff. %")
    body = []
    for label, resp, dose, eff in rows:
        e = "" if eff is None or not math.isfinite(eff) else f"{100 * eff:.1f}"
        body.append((label, support_text(resp), support_text(dose), e))
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(4)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths[:3]) + f"  {{:>{widths[3]}}}"
    lines = [title] if title else []
    lines.append(fmt.format(*header))
    lines.append("-" * (sum(widths) + 6))
    lines += [fmt.format(*r) for r in body]
    return "\n".join(lines) + "\n"


def _cert_text(cert: dict) -> str:
    kind = cert.get("type", "NONE")
    if kind == "GET":
        return f"certificate: GET efficiency bound {cert['bound']:.6f}"
    if kind == "STAGNATION":
        return (f"certificate: stagnation (relative improvement < {cert['rtol']:g} "
                f"over {cert['window']} iterations)")
    if kind == "ELFVING":
        rc = cert.get("random_check", {})
        text = f"certificate: Elfving boundary, 1/rho^2 = {cert.get('phi_from_rho', float('nan')):.6g}"
        if rc:
            text += f"; {rc['n_better']} of {rc['n']} random designs better"
        return text
    return "certificate: none"


def render_report_text(report: DesignReport) -> str:
    eff = next(iter(report.efficiencies.values()), None)
    lines = [render_table([(report.criterion, report.design_response, report.design_dose, eff)]).rstrip()]
    lines.append(f"criterion {report.criterion} value: {report.value:.6g}")
    if report.ratio is not None:
        lines.append(f"ratio r*: {report.ratio:.4f}")
    lines.append(_cert_text(report.certificate))
    if report.iterations is not None:
        lines.append(f"iterations: {report.iterations}" + ("" if report.converged else " (NOT converged)"))
    return "\n".join(lines) + "\n"


def render_evaluation_text(ev: EvaluationReport) -> str:
    lines = [f"netOD support points (weights): {support_text(ev.design_response)}",
             f"Dose support points (weights):  {support_text(ev.design_dose)}", ""]
    w = max(len(e.name) for e in ev.entries) if ev.entries else 8
    lines.append(f"{'criterion':<{w}}  {'value':>14}  {'optimum':>14}  {'efficiency':>10}")
    for e in ev.entries:
        if e.error:
            lines.append(f"{e.name:<{w}}  {e.error}")
            continue
        lines.append(f"{e.name:<{w}}  {e.value:>14.6g}  {e.reference_value:>14.6g}  {e.efficiency:>10.4f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- csv


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for r in rows:
        writer.writerow([repr(sig(v)) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


def render_report_csv(report: DesignReport) -> str:
    rows: list[list] = [["scale", "point", "weight"]]
    for d in (report.design_response, report.design_dose):
        rows += [[d.scale.value, float(p), float(w)] for p, w in d.pairs()]
    return _csv(rows)


def render_evaluation_csv(ev: EvaluationReport) -> str:
    rows: list[list] = [["criterion", "value", "reference_value", "efficiency", "error"]]
    for e in ev.entries:
        rows.append([e.name, e.value if e.value is not None else "", e.reference_value if e.reference_value is not None
                     else "", e.efficiency if e.efficiency is not None else "", e.error or ""])
    return _csv(rows)


def render_curve_csv(columns: dict[str, np.ndarray]) -> str:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], dtype=float) for n in names])
    return _csv([names] + [[float(v) for v in row] for row in data])


# ---------------------------------------------------------------- files


def render(obj, fmt: str, scenario: dict | None = None) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    if isinstance(obj, EvaluationReport):
        return {"json": lambda: dumps(evaluation_to_dict(obj, scenario)),
                "text": lambda: render_evaluation_text(obj),
                "csv": lambda: render_evaluation_csv(obj)}[fmt]()
    return {"json": lambda: dumps(report_to_dict(obj, scenario)),
            "text": lambda: render_report_text(obj),
            "csv": lambda: render_report_csv(obj)}[fmt]()


def emit_report(report, out_dir: str | Path, stem: str, formats: Iterable[str] = ("json", "text"),
                scenario: dict | None = None) -> list[Path]:
    """Write ``report`` to ``out_dir/stem.{json,txt,csv}`` for each requested format."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ext = {"json": "json", "text": "txt", "csv": "csv"}
    paths = []
    for fmt in dict.fromkeys(formats):
        p = out / f"{stem}.{ext[fmt]}"
        p.write_text(render(report, fmt, scenario), encoding="utf-8")
        paths.append(p)
    return paths
