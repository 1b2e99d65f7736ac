"""AdaBoost over survival forests (ADA-RSF, ADA-ESF, ADA-MIX).

Each stage draws a weighted resample, fits a forest on it, scores the forest
on the full training set with a tolerance-based correctness rule, and
reweights the misses. Predictions are the alpha-weighted mean of the stage
predictions.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, DomainError, ModelDegenerateError
from .estimators import average_curves
from .forest import (
    FOREST_SCHEMA,
    Forest,
    ensemble_chf,
    ensemble_survival,
    fit_forest,
    predict_times,
    snap_to_vocabulary,
)
from .models import Aggregation, Dataset, Method, SurvivalCurve, SurvivalRecord, TreeVariant
from .tree import TreeConfig
from .utils import derive_seed

logger = logging.getLogger(__name__)

BOOSTED_SCHEMA = "survival-boost/boosted/v1"
MAX_REDRAWS = 100


@dataclass(frozen=True)
class BoostConfig:
    """Settings of one boosted fit."""

    iterations: int = 10
    ntree: int = 10
    tolerance: float = 0.5
    variation: Method = Method.ADA_ESF
    aggregation: Aggregation = Aggregation.MEAN_OF_MODE
    seed: int = 0
    epsilon_floor: float = 1e-6
    epsilon_ceiling: float = 0.5 - 1e-6
    tree: TreeConfig = field(default_factory=TreeConfig)
    n_jobs: Optional[int] = 1

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigurationError(f"iterations must be at least 1: {self.iterations}")
        if self.ntree < 1:
            raise ConfigurationError(f"ntree must be at least 1: {self.ntree}")
        if not self.tolerance > 0:
            raise ConfigurationError(f"tolerance must be positive: {self.tolerance}")
        if not self.variation.boosted:
            raise ConfigurationError(f"{self.variation.value} is not a boosted variation")
        if not 0.0 < self.epsilon_floor < self.epsilon_ceiling < 1.0:
            raise ConfigurationError("epsilon guards must satisfy 0 < floor < ceiling < 1")

    def stage_variant(self, iteration: int) -> TreeVariant:
        """Weak-learner flavour for a 1-based iteration number."""
        if self.variation == Method.ADA_RSF:
            return TreeVariant.RSF
        if self.variation == Method.ADA_ESF:
            return TreeVariant.ESF
        return TreeVariant.RSF if iteration % 2 == 1 else TreeVariant.ESF


@dataclass(frozen=True, eq=False)
class Stage:
    learner: Forest
    alpha: float
    epsilon: float


@dataclass(frozen=True, eq=False)
class BoostedEnsemble:
    """Fitted stages plus what is needed to score and combine them."""

    stages: tuple[Stage, ...]
    variation: Method
    aggregation: Aggregation
    tolerance: float
    time_scale: float
    vocabulary: np.ndarray
    n_features: int
    weight_history: tuple[np.ndarray, ...] = ()

    @property
    def alphas(self) -> np.ndarray:
        return np.array([stage.alpha for stage in self.stages], dtype=float)

    @property
    def band(self) -> float:
        return self.tolerance * self.time_scale

    def prefix(self, count: int) -> "BoostedEnsemble":
        return BoostedEnsemble(
            stages=self.stages[:count],
            variation=self.variation,
            aggregation=self.aggregation,
            tolerance=self.tolerance,
            time_scale=self.time_scale,
            vocabulary=self.vocabulary,
            n_features=self.n_features,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": BOOSTED_SCHEMA,
            "variation": self.variation.value,
            "aggregation": self.aggregation.value,
            "tolerance": self.tolerance,
            "time_scale": self.time_scale,
            "vocabulary": self.vocabulary.tolist(),
            "n_features": self.n_features,
            "stages": [
                {"alpha": stage.alpha, "epsilon": stage.epsilon, "forest": stage.learner.to_dict()}
                for stage in self.stages
            ],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "BoostedEnsemble":
        if payload.get("schema") != BOOSTED_SCHEMA:
            raise DomainError(f"Unsupported boosted schema: {payload.get('schema')!r}")
        stages = []
        for raw in payload["stages"]:
            if raw["forest"].get("schema") != FOREST_SCHEMA:
                raise DomainError("Boosted stage does not hold a forest")
            stages.append(Stage(Forest.from_dict(raw["forest"]), float(raw["alpha"]), float(raw["epsilon"])))
        return cls(
            stages=tuple(stages),
            variation=Method(payload["variation"]),
            aggregation=Aggregation(payload["aggregation"]),
            tolerance=float(payload["tolerance"]),
            time_scale=float(payload["time_scale"]),
            vocabulary=np.asarray(payload["vocabulary"], dtype=float),
            n_features=int(payload["n_features"]),
        )


def event_time_scale(data: Dataset) -> float:
    """Population standard deviation of the training event times."""
    event_times = data.times[data.events]
    if event_times.size == 0:
        raise DomainError("No event times to scale the correctness band")
    return float(np.std(np.sort(event_times)))


def is_correct(prediction: float, truth: SurvivalRecord, tolerance: float, time_scale: float = 1.0) -> bool:
    """Events: within tolerance * time_scale of the time; censored: not before the censoring time."""
    if truth.is_event:
        return abs(prediction - truth.time) <= tolerance * time_scale
    return prediction >= truth.time


def correctness(predictions: np.ndarray, times: np.ndarray, events: np.ndarray, band: float) -> np.ndarray:
    """Vectorized is_correct with the band already multiplied out."""
    predictions = np.asarray(predictions, dtype=float)
    within = np.abs(predictions - times) <= band
    beyond = predictions >= times
    return np.where(events, within, beyond)


def stage_alpha(epsilon: float) -> float:
    """ln((1 - eps) / eps)."""
    return math.log((1.0 - epsilon) / epsilon)


def clamp_epsilon(epsilon: float, floor: float, ceiling: float) -> float:
    return min(max(epsilon, floor), ceiling)


def weighted_error(weights: np.ndarray, incorrect: np.ndarray) -> float:
    return math.fsum(weights[incorrect]) / math.fsum(weights)


def update_weights(weights: np.ndarray, incorrect: np.ndarray, alpha: float) -> np.ndarray:
    """Multiply misses by exp(alpha) and renormalize to a positive distribution."""
    updated = weights * np.exp(alpha * incorrect.astype(float))
    updated = updated / math.fsum(updated)
    updated = np.maximum(updated, np.finfo(float).tiny)
    return updated / math.fsum(updated)


def content_order(data: Dataset) -> np.ndarray:
    """Row positions sorted by record content (covariates, time, status, cause).

    Rows that tie are identical records, so the ordered rows do not depend on
    how the input was shuffled.
    """
    return np.lexsort((data.cause_labels, data.events, data.times, *data.X.T[::-1]))


def _weighted_sample(
    weights: np.ndarray, order: np.ndarray, events: np.ndarray, seed: int, iteration: int
) -> np.ndarray:
    """Weighted draw with replacement, returned in content order."""
    n = weights.size
    canonical = weights[order]
    for attempt in range(MAX_REDRAWS):
        rng = np.random.default_rng(derive_seed(seed, "boost-sample", iteration, attempt))
        sample = order[np.sort(rng.choice(n, size=n, replace=True, p=canonical))]
        if events[sample].any():
            return sample
        logger.debug("Boosting sample %d attempt %d drew no event; redrawing", iteration, attempt)
    raise DomainError(f"Could not draw a weighted sample with an event after {MAX_REDRAWS} attempts")


def fit_boosted(data: Dataset, cfg: BoostConfig) -> BoostedEnsemble:
    """Run cfg.iterations rounds of weighted resampling, forest fitting and reweighting."""
    data.require_events(2)
    n = len(data)
    time_scale = event_time_scale(data)
    band = cfg.tolerance * time_scale
    weights = np.full(n, 1.0 / n)
    order = content_order(data)
    history = [weights.copy()]
    stages: list[Stage] = []

    for iteration in range(1, cfg.iterations + 1):
        sample = _weighted_sample(weights, order, data.events, cfg.seed, iteration)
        variant = cfg.stage_variant(iteration)
        learner = fit_forest(
            data.subset(sample),
            variant,
            cfg.ntree,
            cfg.tree,
            seed=derive_seed(cfg.seed, "stage", iteration),
            n_jobs=cfg.n_jobs,
        )
        predictions = predict_times(learner, data.X, cfg.aggregation)
        incorrect = ~correctness(predictions, data.times, data.events, band)
        raw_epsilon = weighted_error(weights, incorrect)
        epsilon = clamp_epsilon(raw_epsilon, cfg.epsilon_floor, cfg.epsilon_ceiling)
        if epsilon != raw_epsilon:
            logger.warning("Stage %d error %.6f clamped to %.6f", iteration, raw_epsilon, epsilon)
        alpha = stage_alpha(epsilon)
        weights = update_weights(weights, incorrect, alpha)
        history.append(weights.copy())
        stages.append(Stage(learner=learner, alpha=alpha, epsilon=epsilon))
        logger.info(
            "Stage %d/%d %s: epsilon=%.4f alpha=%.4f", iteration, cfg.iterations, variant.value, epsilon, alpha
        )

    return BoostedEnsemble(
        stages=tuple(stages),
        variation=cfg.variation,
        aggregation=cfg.aggregation,
        tolerance=cfg.tolerance,
        time_scale=time_scale,
        vocabulary=data.event_vocabulary.copy(),
        n_features=data.n_features,
        weight_history=tuple(history),
    )


def stage_predictions(ens: BoostedEnsemble, X: np.ndarray) -> np.ndarray:
    """Per-stage predictions (rows) for each query (columns)."""
    matrix = np.asarray(X, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] != ens.n_features:
        raise DomainError(f"Expected {ens.n_features} covariates, got shape {matrix.shape}")
    return np.vstack([predict_times(stage.learner, matrix, ens.aggregation) for stage in ens.stages])


def predict_boosted_many(ens: BoostedEnsemble, X: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Alpha-normalized combination of the stage predictions, one per row."""
    if not ens.stages:
        raise ModelDegenerateError("Boosted ensemble has no stages")
    alphas = ens.alphas
    total = float(alphas.sum())
    if not total > 0:
        raise ModelDegenerateError("Sum of stage weights is not positive; every stage is at or above chance")
    stacked = stage_predictions(ens, np.atleast_2d(np.asarray(X, dtype=float)))
    combined = np.sum((alphas / total)[:, None] * stacked, axis=0)
    unanimous = np.all(stacked == stacked[0], axis=0)
    combined = np.where(unanimous, stacked[0], combined)
    if ens.aggregation == Aggregation.MAPPED_MEAN_OF_MODE:
        combined = snap_to_vocabulary(combined, ens.vocabulary)
    return combined


def predict_boosted(ens: BoostedEnsemble, x: Sequence[float] | np.ndarray) -> float:
    row = np.asarray(x, dtype=float)
    if row.ndim != 1 or row.size != ens.n_features:
        raise DomainError(f"Expected {ens.n_features} covariates, got {row.size}")
    return float(predict_boosted_many(ens, row[None, :])[0])


def boosted_survival(ens: BoostedEnsemble, x: Sequence[float] | np.ndarray) -> SurvivalCurve:
    """Alpha-weighted mixture of the stage forests' ensemble survival curves."""
    if not ens.stages or not float(ens.alphas.sum()) > 0:
        raise ModelDegenerateError("Boosted ensemble has no positive stage weight")
    curves = [ensemble_survival(stage.learner, x) for stage in ens.stages]
    return average_curves(curves, weights=ens.alphas.tolist())


def exponential_error(ens: BoostedEnsemble, data: Dataset, signed: bool = False) -> float:
    """Exponential loss sum_n exp(-margin_n) of the staged classifier.

    The margin is half the alpha-weighted sum of +1 (correct) / -1
    (incorrect) votes; ``signed=True`` uses its sign instead.
    """
    if not ens.stages:
        raise DomainError("Exponential error needs at least one stage")
    if len(data) == 0:
        return 0.0
    votes = np.vstack(
        [
            np.where(correctness(row, data.times, data.events, ens.band), 1.0, -1.0)
            for row in stage_predictions(ens, data.X)
        ]
    )
    margin = 0.5 * (ens.alphas @ votes)
    if signed:
        margin = np.sign(margin)
    return float(np.sum(np.exp(-margin)))


def boosted_chf(ens: BoostedEnsemble, x: Sequence[float] | np.ndarray) -> SurvivalCurve:
    """Alpha-weighted mixture of the stage forests' ensemble cumulative hazards."""
    if not ens.stages or not float(ens.alphas.sum()) > 0:
        raise ModelDegenerateError("Boosted ensemble has no positive stage weight")
    curves = [ensemble_chf(stage.learner, x) for stage in ens.stages]
    return average_curves(curves, weights=ens.alphas.tolist())


Model = Union[Forest, BoostedEnsemble]


def fit_method(data: Dataset, method: Method, cfg: BoostConfig) -> Model:
    """Fit a plain forest (RSF, ESF) or a boosted ensemble under one config."""
    if method.boosted:
        return fit_boosted(data, replace(cfg, variation=method))
    return fit_forest(data, TreeVariant(method.value), cfg.ntree, cfg.tree, seed=cfg.seed, n_jobs=cfg.n_jobs)


def predict_model(
    model: Model,
    X: Sequence[Sequence[float]] | np.ndarray,
    aggregation: Aggregation = Aggregation.MEAN_OF_MODE,
) -> np.ndarray:
    """Predicted times per row; boosted ensembles use their own aggregation."""
    if isinstance(model, BoostedEnsemble):
        return predict_boosted_many(model, X)
    return predict_times(model, X, aggregation)


def model_survival(model: Model, x: Sequence[float] | np.ndarray) -> SurvivalCurve:
    if isinstance(model, BoostedEnsemble):
        return boosted_survival(model, x)
    return ensemble_survival(model, x)


def model_chf(model: Model, x: Sequence[float] | np.ndarray) -> SurvivalCurve:
    if isinstance(model, BoostedEnsemble):
        return boosted_chf(model, x)
    return ensemble_chf(model, x)
