"""
Report rendering: CSV tables through pandas and aligned text tables through rich.
"""

import logging
from io import StringIO
from pathlib import Path
from typing import Dict, List, Optional, Union

from rich.console import Console
from rich.markup import escape
from rich.table import Table

from perturbation import Certificate
from scenarios import Report, ScenarioResult
from utils import export_data_to_csv, format_flag, format_real, format_short, get_verdict_label

logger = logging.getLogger(__name__)

CERTIFY_COLUMNS = [
    "scenario_id", "theorem", "grade", "hypothesis_ok", "mode", "constant_names", "constant_values",
    "predicted_lower", "predicted_upper", "measured_A", "measured_B", "sound",
]
BOUNDS_COLUMNS = ["scenario_id", "family", "grade", "A", "B", "tight"]
NORMING_COLUMNS = [
    "scenario_id", "grade", "functionals", "exact_on_samples",
    "min_sample_ratio", "max_sample_ratio", "min_coverage", "mean_coverage", "max_coverage",
]
TEXT_WIDTH = 132


def _constant_names(cert: Certificate) -> str:
    names = ";".join(cert.constants)
    return f"{cert.convention}:{names}" if cert.convention != "linear" else names


def certificate_rows(report: Report) -> List[Dict]:
    rows = []
    for result in report.results:
        for cert in result.all_certificates():
            for s in cert.grades:
                rows.append({
                    "scenario_id": result.scenario_id,
                    "theorem": cert.theorem,
                    "grade": s,
                    "hypothesis_ok": format_flag(cert.hypothesis_ok[s]),
                    "mode": cert.constants_mode,
                    "constant_names": _constant_names(cert),
                    "constant_values": ";".join(format_real(vals[s]) for vals in cert.constants.values()),
                    "predicted_lower": cert.predicted[s][0],
                    "predicted_upper": cert.predicted[s][1],
                    "measured_A": cert.measured[s][0],
                    "measured_B": cert.measured[s][1],
                    "sound": format_flag(cert.sound[s]),
                })
    return rows


def bounds_rows(report: Report, tol: Optional[float] = None) -> List[Dict]:
    rows = []
    for result in report.results:
        tight_tol = tol if tol is not None else result.config.get("tolerance", 1e-9)
        for family, bounds in (("original", result.bounds_original), ("perturbed", result.bounds_perturbed)):
            tight = set(bounds.tight_grades(tight_tol))
            for s, (a, b) in enumerate(zip(bounds.A, bounds.B)):
                rows.append({
                    "scenario_id": result.scenario_id, "family": family, "grade": s,
                    "A": a, "B": b, "tight": format_flag(s in tight),
                })
    return rows


def norming_rows(report: Report) -> List[Dict]:
    rows = []
    for result in report.results:
        for built in result.norming:
            rows.append({
                "scenario_id": result.scenario_id,
                "grade": built.grade,
                "functionals": built.frame.m,
                "exact_on_samples": format_flag(built.exact_on_samples),
                "min_sample_ratio": float(built.sample_ratios.min()),
                "max_sample_ratio": float(built.sample_ratios.max()),
                "min_coverage": built.min_coverage,
                "mean_coverage": float(built.probe_ratios.mean()),
                "max_coverage": float(built.probe_ratios.max()),
            })
    return rows


def _certificate_table(cert: Certificate) -> Table:
    title = f"{cert.theorem} ({cert.constants_mode}, {cert.convention})"
    table = Table(title=title, title_justify="left", show_edge=False)
    table.add_column("grade", justify="right")
    for name in cert.constants:
        table.add_column(name, justify="right")
    for name in ("hypothesis", "predicted", "measured", "verdict"):
        table.add_column(name, justify="right" if name != "verdict" else "left")
    for s in cert.grades:
        lower, upper = cert.predicted[s]
        a, b = cert.measured[s]
        table.add_row(
            str(s),
            *(format_short(vals[s]) for vals in cert.constants.values()),
            "ok" if cert.hypothesis_ok[s] else "fails",
            escape(f"[{format_short(lower)}, {format_short(upper)}]"),
            f"({format_short(a)}, {format_short(b)})",
            get_verdict_label(cert.sound[s]),
        )
    return table


def _bounds_table(result: ScenarioResult) -> Table:
    table = Table(title="frame bounds", title_justify="left", show_edge=False)
    for name in ("grade", "A (G)", "B (G)", "A (H)", "B (H)"):
        table.add_column(name, justify="right")
    for s in range(len(result.bounds_original.A)):
        table.add_row(
            str(s),
            format_short(result.bounds_original.A[s]), format_short(result.bounds_original.B[s]),
            format_short(result.bounds_perturbed.A[s]), format_short(result.bounds_perturbed.B[s]),
        )
    return table


def _norming_table(result: ScenarioResult) -> Table:
    table = Table(title="norming frame", title_justify="left", show_edge=False)
    for name in ("grade", "functionals", "exact", "min coverage", "mean coverage"):
        table.add_column(name, justify="right")
    for built in result.norming:
        table.add_row(str(built.grade), str(built.frame.m), format_flag(built.exact_on_samples),
                      format_short(built.min_coverage), format_short(float(built.probe_ratios.mean())))
    return table


def render_text(report: Report) -> str:
    """Grouped per scenario; no timings, so repeated runs give identical text."""
    buffer = StringIO()
    console = Console(file=buffer, width=TEXT_WIDTH, color_system=None, force_terminal=False,
                      highlight=False, emoji=False)
    for result in report.results:
        console.print(f"scenario {result.scenario_id} (seed {result.seed})")
        console.print(_bounds_table(result))
        for cert in result.all_certificates():
            console.print(_certificate_table(cert))
            for note in cert.notes:
                console.print(f"  note: {note}")
        if result.norming:
            console.print(_norming_table(result))
        console.print()
    summary = report.summary()
    console.print(
        "summary: {scenarios} scenarios, {hypothesis_ok} grades with hypothesis satisfied, "
        "{sound} sound, {violations} violations".format(**summary)
    )
    return buffer.getvalue()


def render_csv(report: Report, kind: str = "certify") -> str:
    if kind == "bounds":
        return export_data_to_csv(bounds_rows(report), BOUNDS_COLUMNS)
    if kind == "norming":
        return export_data_to_csv(norming_rows(report), NORMING_COLUMNS)
    return export_data_to_csv(certificate_rows(report), CERTIFY_COLUMNS)


def report_emit(report: Report, fmt: str = "text", out_path: Optional[Union[str, Path]] = None,
                kind: str = "certify") -> str:
    """
    Render a report as text or CSV and write it to out_path when given.

    Args:
        report: completed report
        fmt: "text" or "csv"
        out_path: destination file; nothing is written when None
        kind: which CSV table to emit ("certify", "bounds" or "norming")

    Returns:
        The rendered report

    Raises:
        OSError: when out_path cannot be written
    """
    if fmt not in ("text", "csv"):
        raise ValueError(f"unknown report format {fmt!r}")
    rendered = render_text(report) if fmt == "text" else render_csv(report, kind)
    if out_path is not None:
        Path(out_path).write_text(rendered, encoding="utf-8")
        logger.info("wrote %s report to %s", fmt, out_path)
    return rendered
