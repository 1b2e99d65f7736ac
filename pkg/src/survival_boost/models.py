"""Core data structures for survival-boost."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, ValidationError


class Status(str, Enum):
    """Observation status of a record."""

    EVENT = "event"
    CENSORED = "censored"


class CurveKind(str, Enum):
    """Quantity carried by a SurvivalCurve."""

    SURVIVAL = "survival"
    CUMULATIVE_HAZARD = "cumulative_hazard"
    CUMULATIVE_INCIDENCE = "cumulative_incidence"


class TreeVariant(str, Enum):
    """Tree flavour: bootstrap + exhaustive cutpoints, or full sample + random cutpoints."""

    RSF = "RSF"
    ESF = "ESF"


class SplitRule(str, Enum):
    """Node split statistic."""

    LOGRANK = "logrank"
    LOGRANK_SCORE = "logrank-score"


class Aggregation(str, Enum):
    """How per-tree leaf modes become one predicted time."""

    MEAN_OF_MODE = "mean_of_mode"
    MAPPED_MEAN_OF_MODE = "mapped_mean_of_mode"


class Method(str, Enum):
    """Fitting engines exposed to users."""

    RSF = "RSF"
    ESF = "ESF"
    ADA_RSF = "ADA-RSF"
    ADA_ESF = "ADA-ESF"
    ADA_MIX = "ADA-MIX"

    @property
    def boosted(self) -> bool:
        return self in (Method.ADA_RSF, Method.ADA_ESF, Method.ADA_MIX)


class RmseScope(str, Enum):
    """Records that enter an RMSE."""

    EVENTS_ONLY = "events_only"
    ALL = "all"


@dataclass(frozen=True)
class SurvivalRecord:
    """One observation: covariates, observed time, status and optional cause."""

    covariates: tuple[float, ...]
    time: float
    status: Status
    cause: Optional[int] = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.time) or self.time <= 0:
            raise ValidationError(f"Time must be positive and finite: {self.time!r}")
        if self.cause is not None and self.status != Status.EVENT:
            raise ValidationError("Censored records carry no cause")

    @property
    def is_event(self) -> bool:
        return self.status == Status.EVENT


@dataclass(frozen=True)
class CauseClause:
    """One precedence-ordered clause of a cause derivation rule."""

    label: int
    name: str
    column: str
    values: tuple[str, ...]

    def matches(self, value: Optional[str]) -> bool:
        if value is None:
            return False
        return value.strip().lower() in {item.lower() for item in self.values}


@dataclass(frozen=True)
class CauseRule:
    """Ordered clauses; the first matching clause decides the cause."""

    clauses: tuple[CauseClause, ...]

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(clause.column for clause in self.clauses))


@dataclass(frozen=True)
class ColumnSchema:
    """Maps CSV columns onto record roles."""

    time: str
    status: str
    cause: Optional[str] = None
    covariates: Optional[tuple[str, ...]] = None
    auxiliary: tuple[str, ...] = ()
    time_unit: str = ""

    def roles(self) -> set[str]:
        named = {self.time, self.status, *self.auxiliary}
        if self.cause:
            named.add(self.cause)
        return named


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable collection of records plus column metadata."""

    records: tuple[SurvivalRecord, ...]
    feature_names: tuple[str, ...]
    competing_risk: bool = False
    causes: frozenset[int] = frozenset()
    cause_names: Mapping[int, str] = field(default_factory=dict)
    encodings: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    auxiliary: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    name: str = ""
    time_unit: str = ""
    dropped_rows: int = 0

    def __post_init__(self) -> None:
        width = len(self.feature_names)
        for index, record in enumerate(self.records):
            if len(record.covariates) != width:
                raise ValidationError(
                    f"Record {index} has {len(record.covariates)} covariates, expected {width}"
                )
            if record.cause is not None and not self.competing_risk:
                raise ValidationError(f"Record {index} carries a cause but the dataset is not competing-risk")
            if self.competing_risk and record.is_event and record.cause is None:
                raise ValidationError(f"Event record {index} has no cause in a competing-risk dataset")
        for column, values in self.auxiliary.items():
            if len(values) != len(self.records):
                raise ValidationError(f"Auxiliary column {column!r} is not aligned with the records")
        if self.competing_risk:
            observed = {record.cause for record in self.records if record.cause is not None}
            object.__setattr__(self, "causes", frozenset(self.causes) | frozenset(observed))
        elif self.causes:
            raise ValidationError("Only competing-risk datasets declare causes")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @cached_property
    def X(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, self.n_features))
        return np.array([record.covariates for record in self.records], dtype=float).reshape(
            len(self.records), self.n_features
        )

    @cached_property
    def times(self) -> np.ndarray:
        return np.array([record.time for record in self.records], dtype=float)

    @cached_property
    def events(self) -> np.ndarray:
        return np.array([record.is_event for record in self.records], dtype=bool)

    @cached_property
    def cause_labels(self) -> np.ndarray:
        """Cause per record, 0 for censored records."""
        return np.array([record.cause or 0 for record in self.records], dtype=np.int64)

    @property
    def event_count(self) -> int:
        return int(self.events.sum())

    @cached_property
    def event_vocabulary(self) -> np.ndarray:
        """Sorted distinct event times."""
        return np.unique(self.times[self.events])

    def cause_name(self, cause: int) -> str:
        return self.cause_names.get(cause, str(cause))

    def resolve_cause(self, value: str | int) -> int:
        """Accept a cause label or a cause name."""
        for label, name in self.cause_names.items():
            if str(value).lower() == name.lower():
                return label
        try:
            label = int(value)
        except (TypeError, ValueError):
            raise DomainError(f"Unknown cause {value!r}; known: {self._cause_listing()}") from None
        if label not in self.causes:
            raise DomainError(f"Unknown cause {value!r}; known: {self._cause_listing()}")
        return label

    def _cause_listing(self) -> str:
        return ", ".join(f"{label}={self.cause_name(label)}" for label in sorted(self.causes)) or "none"

    def require_events(self, minimum: int = 1) -> None:
        if self.event_count < minimum:
            raise DomainError(f"Dataset needs at least {minimum} event record(s), found {self.event_count}")

    def subset(self, indices: Iterable[int]) -> "Dataset":
        """Return a dataset over the given record indices (duplicates kept)."""
        picked = [int(index) for index in indices]
        return Dataset(
            records=tuple(self.records[index] for index in picked),
            feature_names=self.feature_names,
            competing_risk=self.competing_risk,
            causes=self.causes,
            cause_names=dict(self.cause_names),
            encodings=dict(self.encodings),
            auxiliary={name: tuple(values[index] for index in picked) for name, values in self.auxiliary.items()},
            name=self.name,
            time_unit=self.time_unit,
        )

    def describe(self) -> dict[str, object]:
        """Summary counts used in logs and report metadata."""
        per_cause = {
            self.cause_name(cause): int((self.cause_labels == cause).sum()) for cause in sorted(self.causes)
        }
        return {
            "name": self.name,
            "records": len(self.records),
            "features": self.n_features,
            "events": self.event_count,
            "censored": len(self.records) - self.event_count,
            "events_per_cause": per_cause,
            "time_unit": self.time_unit,
            "dropped_rows": self.dropped_rows,
        }


@dataclass(frozen=True)
class SplitPlan:
    """Deterministic train/test split settings."""

    seed: int
    test_fraction: float
    stratify: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigurationError(f"test_fraction must lie in (0, 1): {self.test_fraction}")

    def test_size(self, n_records: int) -> int:
        # round first: 10 * 0.3 is 3.0000000000000004 in binary floating point
        size = math.ceil(round(n_records * self.test_fraction, 9))
        if size < 1 or size > n_records - 1:
            raise ConfigurationError(
                f"test_fraction {self.test_fraction} leaves an empty side for {n_records} records"
            )
        return size


@dataclass(frozen=True, eq=False)
class SurvivalCurve:
    """Right-continuous step function over strictly increasing times."""

    times: np.ndarray
    values: np.ndarray
    kind: CurveKind

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float).reshape(-1)
        values = np.asarray(self.values, dtype=float).reshape(-1)
        if times.shape != values.shape:
            raise DomainError("Curve times and values differ in length")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise DomainError("Curve times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def baseline(self) -> float:
        """Value before the first time point."""
        return 1.0 if self.kind == CurveKind.SURVIVAL else 0.0

    @property
    def final_value(self) -> float:
        return float(self.values[-1]) if self.values.size else self.baseline

    def evaluate(self, at: float | Sequence[float] | np.ndarray) -> np.ndarray | float:
        """Step interpolation; scalars in, scalar out."""
        points = np.asarray(at, dtype=float)
        positions = np.searchsorted(self.times, points, side="right") - 1
        padded = np.concatenate(([self.baseline], self.values))
        result = padded[positions + 1]
        if points.ndim == 0:
            return float(result)
        return result

    def to_dict(self) -> dict[str, object]:
        return {"kind": self.kind.value, "times": self.times.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, payload: Mapping[str, object]) -> "SurvivalCurve":
        return cls(
            times=np.asarray(payload["times"], dtype=float),
            values=np.asarray(payload["values"], dtype=float),
            kind=CurveKind(payload["kind"]),
        )


@dataclass(frozen=True, eq=False)
class RiskTable:
    """Counts per distinct observed time (events and censorings)."""

    times: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    censored: np.ndarray
    cause_events: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def causes(self) -> tuple[int, ...]:
        return tuple(sorted(self.cause_events))

    @property
    def event_mask(self) -> np.ndarray:
        return self.events > 0
