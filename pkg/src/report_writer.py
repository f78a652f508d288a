"""Report Writer Module

Deterministic text emitters for command output: exact series in text, CSV,
JSON and LaTeX form, JSON report records with floats at 17 significant
digits, and CSV tables built from pandas DataFrames.
"""

import json
import logging
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import pandas as pd

from src.coefficient_cache import serialize_rational, serialize_series
from src.report_validation import SchemaValidator
from src.series_engine import EnergySeries, VerificationReport


logger = logging.getLogger(__name__)

REPORT_FIELDS = ("level", "method", "order_used", "value", "error_estimate", "stability")
TOEPLITZ_FIELDS = ("m", "n", "re", "im", "measure", "symbol")
SERIES_FORMATS = ("text", "csv", "json", "latex")


def format_float(value: float) -> str:
    return f"{value:.17g}"


def _json_value(value: Any) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_float(value)
    return json.dumps(value)


def format_json_object(record: Dict[str, Any], fields: Sequence[str]) -> str:
    """One JSON object with keys in the given order"""
    return "{" + ", ".join(f"{json.dumps(key)}: {_json_value(record[key])}" for key in fields) + "}"


def format_json_array(records: Iterable[Dict[str, Any]], fields: Sequence[str]) -> str:
    lines = [format_json_object(record, fields) for record in records]
    if not lines:
        return "[]\n"
    return "[\n" + ",\n".join("  " + line for line in lines) + "\n]\n"


def format_report(records: List[Dict[str, Any]],
                  validator: Optional[SchemaValidator] = None) -> str:
    """Validate report records and emit them as a JSON array

    Args:
        records: Records with exactly the report fields
        validator: Schema validator (default: schemas/report_record.yaml)

    Returns:
        JSON text
    """
    validator = validator or SchemaValidator.from_file()
    for record in records:
        validator.require_valid(record)
    return format_json_array(records, REPORT_FIELDS)


def _latex_rational(value: Fraction) -> str:
    sign = "-" if value < 0 else ""
    magnitude = abs(value)
    if magnitude.denominator == 1:
        return f"{sign}{magnitude.numerator}"
    return f"{sign}\\dfrac{{{magnitude.numerator}}}{{{magnitude.denominator}}}"


def format_series(series: EnergySeries, fmt: str = "text") -> str:
    """Exact coefficients of one level

    Args:
        series: Energy series
        fmt: text (one p/q per line), csv, json or latex (one table row)

    Returns:
        Formatted text ending in a newline
    """
    if fmt == "text":
        return serialize_series(series)
    if fmt == "csv":
        rows = [f"{series.level},{k},{serialize_rational(c)}" for k, c in enumerate(series.coeffs)]
        return "level,k,coefficient\n" + "".join(row + "\n" for row in rows)
    if fmt == "json":
        coefficients = ", ".join(json.dumps(serialize_rational(c)) for c in series.coeffs)
        return f'{{"level": {series.level}, "coefficients": [{coefficients}]}}\n'
    if fmt == "latex":
        cells = " & ".join(f"${_latex_rational(c)}$" for c in series.coeffs)
        return f"{series.level} & {cells} \\\\\n"
    raise ValueError(f"unknown series format {fmt!r}; expected one of {SERIES_FORMATS}")


def format_verification(report: VerificationReport) -> str:
    """Cell-by-cell listing followed by the summary line

    Erratum cells also show the printed value they replace.
    """
    lines = []
    for cell in report.cells:
        line = f"n={cell.level} k={cell.order} {serialize_rational(cell.actual)} {cell.status}"
        if cell.erratum:
            line += f" (printed {serialize_rational(cell.expected)})"
        lines.append(line)
    lines.append(report.summary())
    return "\n".join(lines) + "\n"


def format_frame(frame: pd.DataFrame) -> str:
    """CSV with floats at 17 significant digits and LF line endings"""
    return frame.to_csv(index=False, float_format="%.17g", lineterminator="\n")


def write_output(text: str, path: Optional[str] = None) -> None:
    """Write to a file when a path is given, else to stdout"""
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", newline="") as f:
        f.write(text)
    logger.info(f"Wrote {len(text)} bytes to {target}")
