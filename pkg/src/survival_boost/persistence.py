"""Versioned JSON model files.

The envelope carries the column metadata needed to read prediction inputs
(feature order, categorical encodings) next to the fitted model itself.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

import numpy as np

from .boost import BoostedEnsemble, Model, model_chf, model_survival, predict_model
from .competing import CauseSpecificBundle, CauseSpecificModel
from .export import dump_json
from .forest import Forest
from .models import Aggregation, Method, SurvivalCurve
from .utils import DataMismatchError, DomainError

logger = logging.getLogger(__name__)

MODEL_SCHEMA = "survival-boost/model/v1"

Fitted = Union[Forest, BoostedEnsemble, CauseSpecificModel, CauseSpecificBundle]


@dataclass(frozen=True, eq=False)
class ModelEnvelope:
    """A fitted model plus the dataset columns it was trained on."""

    model: Fitted
    method: Method
    aggregation: Aggregation
    feature_names: tuple[str, ...]
    encodings: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    time_unit: str = ""
    dataset: str = ""

    @property
    def kind(self) -> str:
        if isinstance(self.model, CauseSpecificBundle):
            return "cause_specific_bundle"
        if isinstance(self.model, CauseSpecificModel):
            return "cause_specific"
        if isinstance(self.model, BoostedEnsemble):
            return "boosted"
        return "forest"

    def _cause_models(self) -> list[CauseSpecificModel]:
        if isinstance(self.model, CauseSpecificBundle):
            return [self.model.models[cause] for cause in self.model.causes]
        if isinstance(self.model, CauseSpecificModel):
            return [self.model]
        return []

    def _check_width(self, X: np.ndarray) -> np.ndarray:
        matrix = np.atleast_2d(np.asarray(X, dtype=float))
        if matrix.shape[1] != len(self.feature_names):
            raise DataMismatchError(
                f"Model expects {len(self.feature_names)} features ({', '.join(self.feature_names)}), "
                f"got {matrix.shape[1]}"
            )
        return matrix

    def predict(self, X: Sequence[Sequence[float]] | np.ndarray) -> dict[str, np.ndarray]:
        """Prediction columns; rows holding NaN come back as NaN."""
        matrix = self._check_width(X)
        complete = ~np.isnan(matrix).any(axis=1)
        columns: dict[str, np.ndarray] = {}
        cause_models = self._cause_models()
        targets: list[tuple[str, Model]] = (
            [(f"predicted_time_{item.cause_name}", item.model) for item in cause_models]
            if cause_models
            else [("predicted_time", self.model)]  # type: ignore[list-item]
        )
        for name, model in targets:
            values = np.full(matrix.shape[0], np.nan)
            if complete.any():
                values[complete] = predict_model(model, matrix[complete], self.aggregation)
            columns[name] = values
        return columns

    def curves(self, x: Sequence[float] | np.ndarray) -> dict[str, SurvivalCurve]:
        """Survival and cumulative hazard of the model at one covariate profile."""
        row = self._check_width(np.asarray(x, dtype=float))[0]
        cause_models = self._cause_models()
        if not cause_models:
            return {
                "model-survival": model_survival(self.model, row),  # type: ignore[arg-type]
                "model-chf": model_chf(self.model, row),  # type: ignore[arg-type]
            }
        curves: dict[str, SurvivalCurve] = {}
        for item in cause_models:
            curves[f"model-{item.cause_name}-survival"] = item.survival(row)
            curves[f"model-{item.cause_name}-chf"] = item.chf(row)
        return curves

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": MODEL_SCHEMA,
            "kind": self.kind,
            "method": self.method.value,
            "aggregation": self.aggregation.value,
            "feature_names": list(self.feature_names),
            "encodings": {name: list(values) for name, values in self.encodings.items()},
            "time_unit": self.time_unit,
            "dataset": self.dataset,
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "ModelEnvelope":
        if payload.get("schema") != MODEL_SCHEMA:
            raise DomainError(f"Unsupported model schema: {payload.get('schema')!r}")
        readers = {
            "forest": Forest.from_dict,
            "boosted": BoostedEnsemble.from_dict,
            "cause_specific": CauseSpecificModel.from_dict,
            "cause_specific_bundle": CauseSpecificBundle.from_dict,
        }
        kind = payload.get("kind")
        if kind not in readers:
            raise DomainError(f"Unknown model kind {kind!r}; valid: {', '.join(readers)}")
        return cls(
            model=readers[kind](payload["model"]),
            method=Method(payload["method"]),
            aggregation=Aggregation(payload["aggregation"]),
            feature_names=tuple(payload["feature_names"]),
            encodings={name: tuple(values) for name, values in payload.get("encodings", {}).items()},
            time_unit=str(payload.get("time_unit", "")),
            dataset=str(payload.get("dataset", "")),
        )


def save_model(envelope: ModelEnvelope, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    dump_json(envelope.to_dict(), target)
    logger.info("Saved %s model to %s", envelope.kind, target)
    return target


def load_model(path: str | Path) -> ModelEnvelope:
    source = Path(path)
    if not source.is_file():
        raise FileNotFoundError(f"Model file not found: {source}")
    try:
        payload = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DomainError(f"Model file is not valid JSON: {source}: {exc}") from exc
    return ModelEnvelope.from_dict(payload)
