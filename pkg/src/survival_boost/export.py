"""Writers for curves, predictions and benchmark reports."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from openpyxl import Workbook

from .bench import BenchReport
from .models import SurvivalCurve

REPORT_FIELDS = ("method", "aggregation", "train_rmse", "test_rmse", "seconds")


def _number(value: float) -> str:
    """Shortest text that parses back to the same double; NaN becomes empty."""
    value = float(value)
    if np.isnan(value):
        return ""
    return repr(value)


def dump_json(payload: Any, path: str | Path) -> None:
    """Stable JSON: sorted keys, fixed indent, trailing newline."""
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def write_curve_csv(curve: SurvivalCurve, path: str | Path) -> None:
    """Two-column (time, value) CSV of a step function."""
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["time", "value"])
        for time, value in zip(curve.times, curve.values):
            writer.writerow([_number(time), _number(value)])


def write_curves(curves: Mapping[str, SurvivalCurve], directory: str | Path) -> list[Path]:
    """One CSV per curve plus ``curves.json`` holding every curve's {kind, times, values}."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    written = []
    for name, curve in curves.items():
        path = target / f"{name}.csv"
        write_curve_csv(curve, path)
        written.append(path)
    summary = target / "curves.json"
    dump_json({name: curve.to_dict() for name, curve in curves.items()}, summary)
    written.append(summary)
    return written


def write_predictions_csv(columns: Mapping[str, np.ndarray], path: str | Path) -> None:
    """One row per input row: 1-based ``row`` index followed by the prediction columns."""
    names = list(columns)
    length = len(next(iter(columns.values()))) if columns else 0
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["row", *names])
        for index in range(length):
            writer.writerow([index + 1, *(_number(columns[name][index]) for name in names)])


def _report_rows(report: BenchReport) -> list[dict[str, Any]]:
    return [row.to_dict() for row in report.rows]


def write_report_csv(report: BenchReport, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(REPORT_FIELDS))
        writer.writeheader()
        for row in _report_rows(report):
            writer.writerow(row)


def write_report_json(report: BenchReport, path: str | Path) -> None:
    dump_json(report.to_dict(), path)


def _flatten(prefix: str, value: Any) -> list[tuple[str, Any]]:
    if isinstance(value, Mapping):
        items: list[tuple[str, Any]] = []
        for key in sorted(value):
            items.extend(_flatten(f"{prefix}.{key}" if prefix else str(key), value[key]))
        return items
    if isinstance(value, Sequence) and not isinstance(value, str):
        return [(prefix, ", ".join(str(item) for item in value))]
    return [(prefix, value)]


def write_report_xlsx(report: BenchReport, path: str | Path) -> None:
    """Workbook with a ``Results`` sheet of rows and a ``Metadata`` sheet of key/value pairs."""
    workbook = Workbook()
    results = workbook.active
    results.title = "Results"
    results.append(list(REPORT_FIELDS))
    for row in _report_rows(report):
        results.append([row[name] for name in REPORT_FIELDS])
    metadata = workbook.create_sheet("Metadata")
    metadata.append(["key", "value"])
    for key, value in _flatten("", report.metadata):
        metadata.append([key, value if value is None or isinstance(value, (int, float, str)) else str(value)])
    workbook.save(path)


def write_report(report: BenchReport, directory: str | Path, formats: Sequence[str] = ("csv", "json", "xlsx")) -> list[Path]:
    """Write the report in each format plus the comparison curves under ``directory``."""
    target = Path(directory)
    target.mkdir(parents=True, exist_ok=True)
    writers = {"csv": write_report_csv, "json": write_report_json, "xlsx": write_report_xlsx}
    written = []
    for fmt in formats:
        path = target / f"report.{fmt}"
        writers[fmt](report, path)
        written.append(path)
    written.extend(write_curves(report.curves, target / "curves"))
    return written
