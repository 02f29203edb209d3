"""Render a benchmark report as JSON, CSV, or a markdown table.

Row key order is stable across formats, floats keep at least six
significant digits, and JSON preserves insertion order so that reports can
be diffed field by field.
"""

from __future__ import annotations

import csv
import io
import json

from ..errors import ConfigurationError
from .bench import BenchReport

FORMATS = ("json", "csv", "markdown")


def _fmt(value):
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format(value, ".10g")
    return str(value)


def emit_report(report: BenchReport, fmt: str = "json") -> str:
    """Serialize a BenchReport to the requested text format."""
    if fmt not in FORMATS:
        raise ConfigurationError(f"unknown report format {fmt!r}, pick one of {FORMATS}")
    if fmt == "json":
        doc = {
            "task": report.task,
            "quality_metric": report.quality_metric,
            "meta": report.meta,
            "rows": list(report.rows),
        }
        return json.dumps(doc, indent=2) + "\n"
    if not report.rows:
        raise ConfigurationError("report has no rows")
    keys = list(report.rows[0].keys())
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(keys)
        for row in report.rows:
            writer.writerow([_fmt(row[k]) for k in keys])
        return buf.getvalue()
    # markdown: one header, one data row per configuration
    lines = [
        f"### {report.task} ({report.quality_metric}, "
        f"{report.meta.get('pairs', '?')} pairs)",
        "",
        "| " + " | ".join(keys) + " |",
        "| " + " | ".join("---" for _ in keys) + " |",
    ]
    for row in report.rows:
        lines.append("| " + " | ".join(_md_cell(row[k]) for k in keys) + " |")
    return "\n".join(lines) + "\n"


def _md_cell(value):
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)
