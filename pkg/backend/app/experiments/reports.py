import csv
import io
import json
import math
from fractions import Fraction
from typing import Any, Dict, Literal, Optional

from app.core.config import settings
from app.core.errors import InputValidationError
from app.experiments.experiment_manager import ExperimentReport

ReportFormat = Literal["csv", "json"]


def format_float(value: float) -> str:
    if math.isnan(value) or math.isinf(value):
        return str(value)
    return f"{value:.{settings.FLOAT_DIGITS}g}"


def to_plain(value: Any) -> Any:
    """
    JSON-safe value with fixed formatting: integers beyond 2^53 become decimal
    strings, floats keep FLOAT_DIGITS significant digits, fractions become "p/q".
    """
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, int):
        return value if abs(value) < 2 ** 53 else str(value)
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, float):
        if math.isnan(value) or math.isinf(value):
            return str(value)
        return float(format_float(value))
    if isinstance(value, dict):
        return {str(key): to_plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(item) for item in value]
    return str(value)


def _csv_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, Fraction):
        return format_float(float(value))
    return str(value)


def report_envelope(report: ExperimentReport, config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """The JSON envelope {"meta": {...}, "rows": [...]}."""
    meta = {"command": report.command, "columns": report.columns}
    meta.update(report.meta)
    if config is not None:
        meta["config"] = config
    return {
        "meta": to_plain(meta),
        "rows": [to_plain({column: row.get(column) for column in report.columns}) for row in report.rows],
    }


def emit_report(report: ExperimentReport, fmt: ReportFormat = "csv", config: Optional[Dict[str, Any]] = None) -> bytes:
    """
    Serialize a report.

    Parameters:
    - report: the experiment report
    - fmt: "csv" (header plus rows in column order) or "json"
      ({"meta": {...}, "rows": [...]} with the resolved config under meta)
    - config: resolved experiment configuration for the JSON envelope

    Returns:
    - Report bytes; identical inputs give identical bytes
    """
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(report.columns)
        for row in report.rows:
            writer.writerow([_csv_cell(row.get(column)) for column in report.columns])
        return buffer.getvalue().encode("utf-8")
    if fmt == "json":
        envelope = report_envelope(report, config)
        return (json.dumps(envelope, indent=2, sort_keys=True) + "\n").encode("utf-8")
    raise InputValidationError(f"Unknown report format: {fmt}")
