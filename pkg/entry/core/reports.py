"""
Report writers: report.json for machines, report.txt for people, a rich table for the console
"""
import os
from typing import Any, Dict, List, Optional

import orjson
from rich.console import Console
from rich.table import Table

from entry.models import RunReport, SuiteReport
from entry.utils.file_utils import atomic_write_bytes, atomic_write_text
from entry.utils.string_utils import format_number, round_floats

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY
REPORT_DIGITS = 12


def _default(obj: Any):
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"Cannot serialize {type(obj).__name__}")


def dumps_report(report: RunReport) -> bytes:
    """Sorted keys and rounded floats: the same run always yields the same bytes"""
    data = round_floats(report.model_dump(mode="json"), REPORT_DIGITS)
    return orjson.dumps(data, default=_default, option=JSON_OPTIONS) + b"\n"


def write_json_report(report: RunReport, out_dir: str) -> str:
    return atomic_write_bytes(os.path.join(out_dir, "report.json"), dumps_report(report))


# ---------------------------------------------------------------------------
# Text rendering
# ---------------------------------------------------------------------------

def render_suites(reports: List[SuiteReport]) -> str:
    lines = []
    for report in reports:
        lines.append(f"[{'PASS' if report.passed else 'FAIL'}] suite {report.suite.value} (seed {report.seed})")
        for check in report.checks:
            mark = "ok  " if check.passed else "FAIL"
            line = f"  {mark} {check.name}"
            if check.value is not None:
                line += f": {format_number(check.value, 10)}"
            if check.threshold is not None:
                line += f" (threshold {format_number(check.threshold, 10)})"
            lines.append(line)
    return "\n".join(lines)


def _render_certificate(cert: Dict[str, Any], depth: int, lines: List[str]) -> None:
    pad = "  " * depth
    head = f"{pad}- {cert['kind']} [{cert['verdict']}] {cert['subject']}"
    if cert.get("value") is not None:
        head += f" = {format_number(cert['value'], 10)}"
    lines.append(head)
    for assertion in cert.get("assertions", []):
        lines.append(f"{pad}    * {assertion}")
    if cert.get("citation"):
        lines.append(f"{pad}    by: {cert['citation']}")
    for premise in cert.get("premises", []):
        _render_certificate(premise, depth + 1, lines)


def render_certify(result: Dict[str, Any]) -> str:
    """The argument as a premise tree: the verdict first, then what it rests on"""
    lines = [f"Hamiltonian {result['hamiltonian']} on {result['manifold']['label']}"]
    verdict = result.get("verdict")
    if verdict is not None:
        lines.append(f"Verdict: {verdict['verdict']}, length minimizing {verdict.get('scope')}")
        _render_certificate(verdict, 0, lines)
    refusal = result.get("refusal")
    if refusal is not None:
        lines.append(f"Refused: {refusal['message']}")
        for route, reason in refusal["details"].get("routes", {}).items():
            lines.append(f"  route {route}: {reason}")
        if "witness" in refusal["details"]:
            lines.append(f"  witness: {refusal['details']['witness']}")
        if refusal.get("hint"):
            lines.append(f"  hint: {refusal['hint']}")
    trace = result.get("epsilon_trace")
    if trace:
        lines.append("Gromov bounds by epsilon:")
        for row in trace:
            lines.append(f"  eps={row['epsilon']:g}: c >= {row['capacity_bound']:.10g}, gap {row['gap']:.3g}")
    obstruction = result.get("obstruction")
    if obstruction is not None:
        lines.append(f"Volume obstruction for B6({obstruction['radius']:.6g}):")
        for side, info in obstruction["sides"].items():
            cert = info["certificate"]
            lines.append(f"  R^{side}: {cert['assertions'][0]} (excess {cert['value']:.6g}), "
                         f"threshold lambda {info['threshold_lambda']:.6f}")
    return "\n".join(lines)


def render_report(report: RunReport) -> str:
    lines = [f"hofer {report.command.value}: {'PASS' if report.passed else 'FAIL'}"]
    if report.error:
        lines.append(f"error: {report.error.get('message')}")
        if report.error.get("hint"):
            lines.append(f"hint: {report.error['hint']}")
    if "suites" in report.results:
        lines.append(render_suites([SuiteReport.model_validate(s) for s in report.results["suites"]]))
    if "certify" in report.results:
        lines.append(render_certify(report.results["certify"]))
    if report.files:
        lines.append("files: " + ", ".join(report.files))
    return "\n".join(lines) + "\n"


def write_text_report(report: RunReport, out_dir: str) -> str:
    return atomic_write_text(os.path.join(out_dir, "report.txt"), render_report(report))


def print_summary(reports: List[SuiteReport], console: Optional[Console] = None) -> None:
    console = console or Console(stderr=True)
    table = Table(title="Verification")
    table.add_column("suite")
    table.add_column("check")
    table.add_column("value", justify="right")
    table.add_column("threshold", justify="right")
    table.add_column("result")
    for report in reports:
        for check in report.checks:
            table.add_row(report.suite.value, check.name, format_number(check.value),
                          format_number(check.threshold),
                          "[green]PASS[/green]" if check.passed else "[red]FAIL[/red]")
    console.print(table)
