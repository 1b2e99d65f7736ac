"""Dataset ingestion from Excel workbooks."""
from __future__ import annotations

from datetime import date, datetime
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
from openpyxl import load_workbook

from ..models import ColumnSchema, Dataset
from ..utils import ParseError
from .tabular import Row, build_covariates, build_dataset


def _cell_text(value: object) -> str:
    """Render a cell the way a CSV export would."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "TRUE" if value else "FALSE"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (datetime, date)):
        raise ParseError(f"Date cells are not supported as dataset values: {value!r}")
    return str(value).strip()


def read_sheet_rows(path: Path, sheet: Optional[str] = None) -> tuple[list[str], list[Row]]:
    """Header and rows of the named sheet (first sheet by default)."""
    workbook = load_workbook(path, read_only=True, data_only=True)
    try:
        if sheet is not None and sheet not in workbook.sheetnames:
            raise ParseError(f"Missing {sheet!r} sheet in Excel file; sheets: {', '.join(workbook.sheetnames)}")
        worksheet = workbook[sheet] if sheet is not None else workbook.worksheets[0]
        iterator = worksheet.iter_rows(values_only=True)
        first = next(iterator, None)
        if first is None:
            raise ParseError(f"Sheet {worksheet.title!r} is empty")
        header = [_cell_text(value) for value in first]
        while header and not header[-1]:
            header.pop()
        if not header or any(not name for name in header):
            raise ParseError(f"Sheet {worksheet.title!r} has blank header cells")
        if len(set(header)) != len(header):
            raise ParseError(f"Sheet {worksheet.title!r} header repeats a column name")

        rows: list[Row] = []
        for line, values in enumerate(iterator, start=2):
            cells = [_cell_text(value) for value in values]
            if not any(cells):
                continue
            if any(cells[len(header):]):
                raise ParseError(f"Row {line} has values beyond the {len(header)} header columns")
            cells += [""] * (len(header) - len(cells))
            rows.append((line, dict(zip(header, cells))))
    finally:
        workbook.close()
    return header, rows


def load_excel(
    path: str | Path,
    schema: ColumnSchema,
    sheet: Optional[str] = None,
    name: Optional[str] = None,
    encodings: Optional[Mapping[str, Sequence[str]]] = None,
) -> Dataset:
    """Load a dataset from an .xlsx workbook under the same rules as load_csv."""
    book_path = Path(path)
    header, rows = read_sheet_rows(book_path, sheet)
    return build_dataset(header, rows, schema, name or book_path.stem, encodings, source=str(book_path))


def load_excel_covariates(
    path: str | Path,
    feature_names: Sequence[str],
    encodings: Mapping[str, Sequence[str]],
    sheet: Optional[str] = None,
) -> np.ndarray:
    book_path = Path(path)
    header, rows = read_sheet_rows(book_path, sheet)
    return build_covariates(header, rows, feature_names, encodings, source=str(book_path))
