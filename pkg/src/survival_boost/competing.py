"""Cause-specific fitting and per-cause curves for competing-risk data.

A cause-specific fit recodes the full sample: the target cause stays an
event, every other cause becomes a censoring at its observed time, and the
usual forest or boosting pipeline runs on the result.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .boost import BoostConfig, BoostedEnsemble, Model, fit_method, model_chf, model_survival, predict_model
from .errors import DomainError
from .estimators import aalen_johansen, cause_specific_chf, kaplan_meier, risk_table_from_arrays
from .forest import Forest
from .models import Aggregation, Dataset, Method, Status, SurvivalCurve, SurvivalRecord

logger = logging.getLogger(__name__)

RECODING = "target-cause-event/other-causes-censored"


def recode_for_cause(data: Dataset, cause: int) -> Dataset:
    """Binary view of ``data`` for one cause; other causes become censorings."""
    if not data.competing_risk:
        raise DomainError("Cause recoding needs a competing-risk dataset")
    if cause not in data.causes:
        known = ", ".join(str(label) for label in sorted(data.causes)) or "none"
        raise DomainError(f"Unknown cause {cause!r}; known causes: {known}")
    records = tuple(
        SurvivalRecord(
            record.covariates,
            record.time,
            Status.EVENT if record.cause == cause else Status.CENSORED,
        )
        for record in data.records
    )
    return Dataset(
        records=records,
        feature_names=data.feature_names,
        encodings=dict(data.encodings),
        auxiliary=dict(data.auxiliary),
        name=data.name,
        time_unit=data.time_unit,
        dropped_rows=data.dropped_rows,
    )


@dataclass(frozen=True, eq=False)
class CauseSpecificModel:
    """A forest or boosted ensemble fitted on one cause's recoded sample."""

    cause: int
    cause_name: str
    engine: Method
    model: Model
    recoding: str = RECODING
    train_events: int = 0
    train_censored: int = 0

    def predict(self, X: Sequence[Sequence[float]] | np.ndarray, aggregation: Aggregation) -> np.ndarray:
        return predict_model(self.model, X, aggregation)

    def survival(self, x: Sequence[float] | np.ndarray) -> SurvivalCurve:
        """Cause-specific survival exp(-cumulative hazard) at a covariate profile."""
        return model_survival(self.model, x)

    def chf(self, x: Sequence[float] | np.ndarray) -> SurvivalCurve:
        return model_chf(self.model, x)

    def to_dict(self) -> dict[str, Any]:
        return {
            "cause": self.cause,
            "cause_name": self.cause_name,
            "engine": self.engine.value,
            "recoding": self.recoding,
            "train_events": self.train_events,
            "train_censored": self.train_censored,
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "CauseSpecificModel":
        engine = Method(payload["engine"])
        raw = payload["model"]
        model: Model = BoostedEnsemble.from_dict(raw) if engine.boosted else Forest.from_dict(raw)
        return cls(
            cause=int(payload["cause"]),
            cause_name=str(payload["cause_name"]),
            engine=engine,
            model=model,
            recoding=str(payload.get("recoding", RECODING)),
            train_events=int(payload.get("train_events", 0)),
            train_censored=int(payload.get("train_censored", 0)),
        )


def fit_cause_specific(data: Dataset, cause: int, engine: Method, cfg: BoostConfig) -> CauseSpecificModel:
    """Fit ``engine`` on the cause-recoded sample under the same seed as a plain fit."""
    recoded = recode_for_cause(data, cause)
    recoded.require_events(2 if engine.boosted else 1)
    logger.info(
        "Fitting %s for cause %s: %d events, %d censored",
        engine.value,
        data.cause_name(cause),
        recoded.event_count,
        len(recoded) - recoded.event_count,
    )
    return CauseSpecificModel(
        cause=cause,
        cause_name=data.cause_name(cause),
        engine=engine,
        model=fit_method(recoded, engine, cfg),
        train_events=recoded.event_count,
        train_censored=len(recoded) - recoded.event_count,
    )


@dataclass(frozen=True, eq=False)
class CauseSpecificBundle:
    """One cause-specific model per cause, keyed by cause label."""

    models: Mapping[int, CauseSpecificModel]

    @property
    def causes(self) -> tuple[int, ...]:
        return tuple(sorted(self.models))

    def predict(self, X: Sequence[Sequence[float]] | np.ndarray, aggregation: Aggregation) -> dict[int, np.ndarray]:
        return {cause: self.models[cause].predict(X, aggregation) for cause in self.causes}

    def to_dict(self) -> dict[str, Any]:
        return {"models": [self.models[cause].to_dict() for cause in self.causes]}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "CauseSpecificBundle":
        models = [CauseSpecificModel.from_dict(item) for item in payload["models"]]
        return cls(models={model.cause: model for model in models})


def fit_all_causes(data: Dataset, engine: Method, cfg: BoostConfig) -> CauseSpecificBundle:
    """Fit every declared cause independently, in parallel over causes."""
    if not data.competing_risk or not data.causes:
        raise DomainError("Fitting all causes needs a competing-risk dataset with at least one cause")
    causes = sorted(data.causes)
    models = Parallel(n_jobs=cfg.n_jobs)(
        delayed(fit_cause_specific)(data, cause, engine, cfg) for cause in causes
    )
    return CauseSpecificBundle(models=dict(zip(causes, models)))


@dataclass(frozen=True, eq=False)
class CauseCurves:
    """All-cause Kaplan-Meier plus per-cause incidence and hazard curves."""

    event_free: SurvivalCurve
    incidence: Mapping[int, SurvivalCurve]
    hazards: Mapping[int, SurvivalCurve]
    cause_names: Mapping[int, str]


def cause_curves(data: Dataset, causes: Optional[Sequence[int]] = None) -> CauseCurves:
    """Aalen-Johansen incidence and cause-specific Nelson-Aalen per cause on the full sample."""
    if not data.competing_risk:
        raise DomainError("Cause curves need a competing-risk dataset")
    if not data.causes:
        raise DomainError("Cause curves need at least one cause")
    selected = sorted(data.causes) if causes is None else list(causes)
    table = risk_table_from_arrays(data.times, data.events, data.cause_labels, data.causes)
    return CauseCurves(
        event_free=kaplan_meier(table),
        incidence={cause: aalen_johansen(table, cause) for cause in selected},
        hazards={cause: cause_specific_chf(table, cause) for cause in selected},
        cause_names={cause: data.cause_name(cause) for cause in selected},
    )
