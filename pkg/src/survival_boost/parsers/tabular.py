"""CSV reader and writer for survival datasets.

Rows reach ``build_dataset`` as ``(line, {column: text})`` pairs so that the
workbook reader can share the same schema rules.
"""
from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from ..models import ColumnSchema, Dataset, Status, SurvivalRecord
from ..utils import (
    DataMismatchError,
    ParseError,
    ValidationError,
    is_missing,
    parse_cause,
    parse_float,
    parse_status,
    parse_time,
)

logger = logging.getLogger(__name__)

Row = tuple[int, dict[str, str]]


def read_csv_rows(path: Path) -> tuple[list[str], list[Row]]:
    """Header and stripped rows; line numbers count the header as line 1."""
    with path.open(newline="", encoding="utf-8-sig") as handle:
        reader = csv.DictReader(handle)
        if not reader.fieldnames:
            raise ParseError(f"CSV file has no header row: {path}")
        header = [name.strip() for name in reader.fieldnames]
        if len(set(header)) != len(header):
            raise ParseError(f"CSV header repeats a column name: {path}")
        rows: list[Row] = []
        try:
            for raw in reader:
                line = reader.line_num
                if None in raw or any(value is None for value in raw.values()):
                    raise ParseError(f"Line {line} has {_width(raw)} fields, expected {len(header)}")
                rows.append((line, {name: value.strip() for name, value in zip(header, raw.values())}))
        except csv.Error as exc:
            raise ParseError(f"Malformed CSV at line {reader.line_num}: {exc}") from exc
    return header, rows


def _width(raw: Mapping[Optional[str], object]) -> int:
    extra = raw.get(None)
    present = sum(1 for key, value in raw.items() if key is not None and value is not None)
    return present + (len(extra) if isinstance(extra, list) else 0)


def _require_columns(header: Sequence[str], names: Iterable[str], source: str) -> None:
    missing = [name for name in names if name not in header]
    if missing:
        raise ValidationError(f"{source} is missing column(s): {', '.join(missing)}")


def _covariate_columns(header: Sequence[str], schema: ColumnSchema) -> tuple[str, ...]:
    if schema.covariates is not None:
        return tuple(schema.covariates)
    roles = schema.roles()
    return tuple(name for name in header if name not in roles)


def _encodings_for(
    columns: Sequence[str],
    rows: Sequence[Row],
    pinned: Mapping[str, Sequence[str]],
) -> dict[str, tuple[str, ...]]:
    """Category order per non-numeric column, by first appearance."""
    encodings: dict[str, tuple[str, ...]] = {}
    for column in columns:
        if column in pinned:
            encodings[column] = tuple(pinned[column])
            continue
        values = [row[column] for _, row in rows if not is_missing(row[column])]
        if all(parse_float(value) is not None for value in values):
            continue
        encodings[column] = tuple(dict.fromkeys(values))
    return encodings


def _encode(column: str, value: str, encodings: Mapping[str, tuple[str, ...]], line: int) -> float:
    categories = encodings.get(column)
    if categories is None:
        number = parse_float(value)
        if number is None:
            raise ValidationError(f"Non-numeric value in column {column!r} (line {line}): {value!r}")
        return number
    try:
        return float(categories.index(value))
    except ValueError:
        raise ValidationError(
            f"Unknown category in column {column!r} (line {line}): {value!r}; known: {', '.join(categories)}"
        ) from None


def build_dataset(
    header: Sequence[str],
    rows: Sequence[Row],
    schema: ColumnSchema,
    name: str = "",
    encodings: Optional[Mapping[str, Sequence[str]]] = None,
    source: str = "input",
) -> Dataset:
    """Turn header + rows into a Dataset under the column schema."""
    required = [schema.time, schema.status, *schema.auxiliary]
    if schema.cause:
        required.append(schema.cause)
    covariates = _covariate_columns(header, schema)
    _require_columns(header, [*required, *covariates], source)
    if not covariates:
        raise ValidationError(f"{source} has no covariate columns")

    kept = [
        (line, row) for line, row in rows if not any(is_missing(row[column]) for column in covariates)
    ]
    dropped = len(rows) - len(kept)
    if dropped:
        logger.warning("Dropped %d row(s) with missing covariates from %s", dropped, source)
    codes = _encodings_for(covariates, kept, encodings or {})

    records: list[SurvivalRecord] = []
    for line, row in rows:
        for column in (schema.time, schema.status):
            if is_missing(row[column]):
                raise ValidationError(f"Missing {column!r} value (line {line})")
    for line, row in kept:
        time = parse_time(row[schema.time], line)
        status = parse_status(row[schema.status], line)
        cause = parse_cause(row[schema.cause], line) if schema.cause else None
        if status == Status.EVENT and schema.cause and cause is None:
            raise ValidationError(f"Event record without a cause (line {line})")
        if status == Status.CENSORED and cause is not None:
            raise ValidationError(f"Censored record carries cause {cause} (line {line})")
        records.append(
            SurvivalRecord(
                covariates=tuple(_encode(column, row[column], codes, line) for column in covariates),
                time=time,
                status=status,
                cause=cause,
            )
        )

    dataset = Dataset(
        records=tuple(records),
        feature_names=covariates,
        competing_risk=bool(schema.cause),
        encodings=codes,
        auxiliary={column: tuple(row[column] for _, row in kept) for column in schema.auxiliary},
        name=name,
        time_unit=schema.time_unit,
        dropped_rows=dropped,
    )
    logger.info(
        "Loaded %s: %d records, %d features, %d events, %d dropped",
        name or source,
        len(dataset),
        dataset.n_features,
        dataset.event_count,
        dropped,
    )
    return dataset


def build_covariates(
    header: Sequence[str],
    rows: Sequence[Row],
    feature_names: Sequence[str],
    encodings: Mapping[str, Sequence[str]],
    source: str = "input",
) -> np.ndarray:
    """Covariate matrix in model column order; rows with a missing value become NaN rows."""
    missing = [name for name in feature_names if name not in header]
    if missing:
        extra = [name for name in header if name not in feature_names]
        raise DataMismatchError(
            f"{source} does not match the model features; missing: {', '.join(missing)}; "
            f"extra: {', '.join(extra) or 'none'}"
        )
    codes = {column: tuple(values) for column, values in encodings.items()}
    matrix = np.full((len(rows), len(feature_names)), np.nan)
    for index, (line, row) in enumerate(rows):
        if any(is_missing(row[column]) for column in feature_names):
            continue
        matrix[index] = [_encode(column, row[column], codes, line) for column in feature_names]
    return matrix


def load_csv(
    path: str | Path,
    schema: ColumnSchema,
    name: Optional[str] = None,
    encodings: Optional[Mapping[str, Sequence[str]]] = None,
) -> Dataset:
    """Load a dataset from a UTF-8 CSV file with a header row."""
    csv_path = Path(path)
    header, rows = read_csv_rows(csv_path)
    return build_dataset(header, rows, schema, name or csv_path.stem, encodings, source=str(csv_path))


def load_csv_covariates(
    path: str | Path,
    feature_names: Sequence[str],
    encodings: Mapping[str, Sequence[str]],
) -> np.ndarray:
    csv_path = Path(path)
    header, rows = read_csv_rows(csv_path)
    return build_covariates(header, rows, feature_names, encodings, source=str(csv_path))


def _covariate_text(dataset: Dataset, column: str, value: float) -> str:
    categories = dataset.encodings.get(column)
    if categories is not None:
        return categories[int(value)]
    return repr(float(value))


def dataset_rows(dataset: Dataset, schema: ColumnSchema) -> tuple[list[str], Iterator[list[str]]]:
    """Header and text rows that reload into the same records under ``schema``."""
    header = [*dataset.feature_names, schema.time, schema.status]
    if dataset.competing_risk:
        if not schema.cause:
            raise ValidationError("Competing-risk datasets need a cause column to be written")
        header.append(schema.cause)
    header.extend(dataset.auxiliary)

    def rows() -> Iterator[list[str]]:
        for index, record in enumerate(dataset.records):
            row = [
                _covariate_text(dataset, column, value)
                for column, value in zip(dataset.feature_names, record.covariates)
            ]
            row.append(repr(record.time))
            row.append("1" if record.is_event else "0")
            if dataset.competing_risk:
                row.append(str(record.cause or 0))
            row.extend(values[index] for values in dataset.auxiliary.values())
            yield row

    return header, rows()


def write_csv(dataset: Dataset, path: str | Path, schema: Optional[ColumnSchema] = None) -> ColumnSchema:
    """Write records, encodings as labels and auxiliary columns; returns the schema to reload with."""
    schema = schema or ColumnSchema(
        time="time",
        status="status",
        cause="cause" if dataset.competing_risk else None,
        covariates=dataset.feature_names,
        auxiliary=tuple(dataset.auxiliary),
        time_unit=dataset.time_unit,
    )
    header, rows = dataset_rows(dataset, schema)
    with Path(path).open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    return schema
