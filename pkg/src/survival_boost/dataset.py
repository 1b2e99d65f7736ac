"""Dataset loading, cause derivation and deterministic train/test splits."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from .models import CauseRule, ColumnSchema, Dataset, SplitPlan, SurvivalRecord
from .parsers.excel import load_excel, load_excel_covariates
from .parsers.tabular import load_csv, load_csv_covariates, write_csv
from .utils import ConfigurationError, ValidationError, derive_seed

logger = logging.getLogger(__name__)

EXCEL_SUFFIXES = (".xlsx", ".xlsm")

__all__ = [
    "derive_cause_labels",
    "drop_causes",
    "load_covariates",
    "load_csv",
    "load_dataset",
    "train_test_split",
    "write_csv",
]


def _is_excel(path: Path) -> bool:
    return path.suffix.lower() in EXCEL_SUFFIXES


def load_dataset(
    path: str | Path,
    schema: ColumnSchema,
    rule: Optional[CauseRule] = None,
    sheet: Optional[str] = None,
    name: Optional[str] = None,
    encodings: Optional[Mapping[str, Sequence[str]]] = None,
) -> Dataset:
    """Load a CSV or workbook and, when a rule is given, derive cause labels.

    ``encodings`` pins category order for columns a fitted model already knows.
    """
    source = Path(path)
    if not source.is_file():
        raise FileNotFoundError(f"Dataset file not found: {source}")
    if _is_excel(source):
        data = load_excel(source, schema, sheet=sheet, name=name, encodings=encodings)
    else:
        data = load_csv(source, schema, name=name, encodings=encodings)
    if rule is not None:
        data = derive_cause_labels(data, rule)
    return data


def load_covariates(
    path: str | Path,
    feature_names: Sequence[str],
    encodings: Mapping[str, Sequence[str]],
    sheet: Optional[str] = None,
) -> np.ndarray:
    """Covariates of an input file in model column order (NaN rows where a value is missing)."""
    source = Path(path)
    if not source.is_file():
        raise FileNotFoundError(f"Input file not found: {source}")
    if _is_excel(source):
        return load_excel_covariates(source, feature_names, encodings, sheet=sheet)
    return load_csv_covariates(source, feature_names, encodings)


def derive_cause_labels(raw: Dataset, rule: CauseRule) -> Dataset:
    """Label each event with the first matching clause of ``rule``.

    Rule columns are read from the dataset's auxiliary columns. An event that
    matches no clause, or a censored record that matches one, is rejected.
    """
    missing = [column for column in rule.columns if column not in raw.auxiliary]
    if missing:
        available = ", ".join(raw.auxiliary) or "none"
        raise ConfigurationError(
            f"Cause rule references missing column(s): {', '.join(missing)}; auxiliary columns: {available}"
        )

    records: list[SurvivalRecord] = []
    for index, record in enumerate(raw.records):
        label = next(
            (clause.label for clause in rule.clauses if clause.matches(raw.auxiliary[clause.column][index])),
            None,
        )
        if record.is_event and label is None:
            raise ValidationError(f"Event record {index} matches no cause clause")
        if not record.is_event and label is not None:
            raise ValidationError(f"Censored record {index} matches cause clause {label}")
        records.append(SurvivalRecord(record.covariates, record.time, record.status, label))

    data = Dataset(
        records=tuple(records),
        feature_names=raw.feature_names,
        competing_risk=True,
        causes=frozenset(clause.label for clause in rule.clauses),
        cause_names={clause.label: clause.name for clause in rule.clauses},
        encodings=dict(raw.encodings),
        auxiliary=dict(raw.auxiliary),
        name=raw.name,
        time_unit=raw.time_unit,
        dropped_rows=raw.dropped_rows,
    )
    logger.info("Derived causes for %s: %s", data.name or "dataset", data.describe()["events_per_cause"])
    return data


def drop_causes(data: Dataset) -> Dataset:
    """All-cause view of a competing-risk dataset: every event kept, labels removed."""
    if not data.competing_risk:
        return data
    return Dataset(
        records=tuple(SurvivalRecord(record.covariates, record.time, record.status) for record in data.records),
        feature_names=data.feature_names,
        encodings=dict(data.encodings),
        auxiliary=dict(data.auxiliary),
        name=data.name,
        time_unit=data.time_unit,
        dropped_rows=data.dropped_rows,
    )


def _stratified_test_indices(data: Dataset, plan: SplitPlan, test_size: int) -> np.ndarray:
    events = np.flatnonzero(data.events)
    censored = np.flatnonzero(~data.events)
    event_share = round(test_size * events.size / len(data))
    event_share = min(max(event_share, test_size - censored.size), events.size, test_size)
    picked = []
    for label, group, count in (("events", events, event_share), ("censored", censored, test_size - event_share)):
        rng = np.random.default_rng(derive_seed(plan.seed, "split", label))
        picked.append(group[rng.permutation(group.size)[:count]])
    return np.concatenate(picked)


def train_test_split(data: Dataset, plan: SplitPlan) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive partition with the test side of size ceil(n * fraction)."""
    n = len(data)
    test_size = plan.test_size(n)
    if plan.stratify:
        test = _stratified_test_indices(data, plan, test_size)
    else:
        rng = np.random.default_rng(derive_seed(plan.seed, "split"))
        test = rng.permutation(n)[:test_size]
    mask = np.zeros(n, dtype=bool)
    mask[test] = True
    train_indices = np.flatnonzero(~mask)
    test_indices = np.flatnonzero(mask)
    logger.debug("Split %d records into %d train / %d test", n, train_indices.size, test_indices.size)
    return data.subset(train_indices), data.subset(test_indices)
