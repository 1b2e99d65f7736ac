"""Nonparametric estimators on right-censored and competing-risk samples.

All curves jump only at event times. Censorings reduce the risk set but add no
curve point. The number at risk at a time t counts every record whose observed
time is at least t.
"""
from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DomainError
from .models import CurveKind, RiskTable, SurvivalCurve, SurvivalRecord


def risk_table_from_arrays(
    times: np.ndarray,
    events: np.ndarray,
    causes: Optional[np.ndarray] = None,
    declared_causes: Iterable[int] = (),
) -> RiskTable:
    """Build a RiskTable from parallel arrays (cause 0 means censored)."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    if times.size == 0:
        raise DomainError("Cannot build a risk table from an empty sample")
    if np.any(times <= 0):
        raise DomainError("Observed times must be positive")

    distinct, inverse = np.unique(times, return_inverse=True)
    counts = np.bincount(inverse, minlength=distinct.size)
    event_counts = np.bincount(inverse, weights=events.astype(float), minlength=distinct.size)
    at_risk = times.size - np.concatenate(([0], np.cumsum(counts)[:-1]))

    cause_events: dict[int, np.ndarray] = {}
    if causes is not None:
        causes = np.asarray(causes, dtype=np.int64)
        labels = set(int(label) for label in np.unique(causes[events]) if label > 0)
        labels.update(int(label) for label in declared_causes)
        for label in sorted(labels):
            hits = (events & (causes == label)).astype(float)
            cause_events[label] = np.bincount(inverse, weights=hits, minlength=distinct.size).astype(np.int64)

    event_counts = event_counts.astype(np.int64)
    return RiskTable(
        times=distinct,
        at_risk=at_risk.astype(np.int64),
        events=event_counts,
        censored=counts.astype(np.int64) - event_counts,
        cause_events=cause_events,
    )


def risk_table(records: Sequence[SurvivalRecord], declared_causes: Iterable[int] = ()) -> RiskTable:
    """Risk table of a collection of records; duplicates count once per copy."""
    declared_causes = tuple(declared_causes)
    if len(records) == 0:
        raise DomainError("Cannot build a risk table from an empty sample")
    times = np.array([record.time for record in records], dtype=float)
    events = np.array([record.is_event for record in records], dtype=bool)
    has_causes = any(record.cause is not None for record in records) or bool(declared_causes)
    causes = np.array([record.cause or 0 for record in records], dtype=np.int64) if has_causes else None
    return risk_table_from_arrays(times, events, causes, declared_causes)


def _hazard_increments(table: RiskTable, events: np.ndarray) -> np.ndarray:
    return events / table.at_risk


def kaplan_meier(table: RiskTable) -> SurvivalCurve:
    """Product-limit survival estimate over the table's event times."""
    if len(table) == 0:
        raise DomainError("Empty risk table")
    factors = 1.0 - _hazard_increments(table, table.events)
    survival = np.cumprod(factors)
    mask = table.event_mask
    return SurvivalCurve(table.times[mask], survival[mask], CurveKind.SURVIVAL)


def nelson_aalen(table: RiskTable) -> SurvivalCurve:
    """All-cause cumulative hazard: running sum of d/Y over event times."""
    if len(table) == 0:
        raise DomainError("Empty risk table")
    mask = table.event_mask
    hazard = np.cumsum(_hazard_increments(table, table.events)[mask])
    return SurvivalCurve(table.times[mask], hazard, CurveKind.CUMULATIVE_HAZARD)


def _cause_counts(table: RiskTable, cause: int) -> np.ndarray:
    try:
        return table.cause_events[cause]
    except KeyError:
        known = ", ".join(str(label) for label in table.causes) or "none"
        raise DomainError(f"Unknown cause {cause!r}; table causes: {known}") from None


def cause_specific_chf(table: RiskTable, cause: int) -> SurvivalCurve:
    """Cause-specific Nelson-Aalen cumulative hazard."""
    counts = _cause_counts(table, cause)
    mask = counts > 0
    hazard = np.cumsum(_hazard_increments(table, counts)[mask])
    return SurvivalCurve(table.times[mask], hazard, CurveKind.CUMULATIVE_HAZARD)


def survival_left_limits(table: RiskTable) -> np.ndarray:
    """Kaplan-Meier value just before each distinct time of the table."""
    survival = np.cumprod(1.0 - _hazard_increments(table, table.events))
    return np.concatenate(([1.0], survival[:-1]))


def aalen_johansen(table: RiskTable, cause: int) -> SurvivalCurve:
    """Cumulative incidence of one cause, weighting by the all-cause KM left limit."""
    counts = _cause_counts(table, cause)
    mask = counts > 0
    increments = survival_left_limits(table) * _hazard_increments(table, counts)
    incidence = np.cumsum(increments[mask])
    return SurvivalCurve(table.times[mask], incidence, CurveKind.CUMULATIVE_INCIDENCE)


def survival_from_hazard(hazard: SurvivalCurve) -> SurvivalCurve:
    """Map a cumulative hazard onto exp(-hazard)."""
    if hazard.kind != CurveKind.CUMULATIVE_HAZARD:
        raise DomainError(f"Expected a cumulative hazard curve, got {hazard.kind.value}")
    return SurvivalCurve(hazard.times, np.exp(-hazard.values), CurveKind.SURVIVAL)


def average_curves(curves: Sequence[SurvivalCurve], weights: Optional[Sequence[float]] = None) -> SurvivalCurve:
    """Pointwise (weighted) average on the union of the curves' jump times."""
    if not curves:
        raise DomainError("Cannot average zero curves")
    kind = curves[0].kind
    if any(curve.kind != kind for curve in curves):
        raise DomainError("Cannot average curves of different kinds")
    if len(curves) == 1 and weights is None:
        return curves[0]
    grid = np.unique(np.concatenate([curve.times for curve in curves]))
    stacked = np.vstack([curve.evaluate(grid) for curve in curves])
    if weights is None:
        values = stacked.mean(axis=0)
    else:
        scale = np.asarray(weights, dtype=float)
        values = (scale / scale.sum()) @ stacked
    same = np.all(stacked == stacked[0], axis=0)
    values = np.where(same, stacked[0], values)
    return SurvivalCurve(grid, values, kind)
