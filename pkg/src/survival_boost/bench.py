"""Benchmark protocol: train/test RMSE, wall-clock time and comparison curves."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import __version__
from .boost import BoostConfig, fit_method, model_survival, predict_model
from .competing import recode_for_cause
from .dataset import drop_causes, train_test_split
from .estimators import kaplan_meier, risk_table_from_arrays
from .models import Aggregation, Dataset, Method, RmseScope, SplitPlan, SurvivalCurve, SurvivalRecord
from .tree import TreeConfig
from .utils import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_METHODS = (Method.ADA_RSF, Method.ADA_ESF, Method.ADA_MIX)


def rmse_arrays(
    predictions: np.ndarray,
    times: np.ndarray,
    events: np.ndarray,
    scope: RmseScope = RmseScope.EVENTS_ONLY,
) -> float:
    predictions = np.asarray(predictions, dtype=float)
    times = np.asarray(times, dtype=float)
    if predictions.shape != times.shape:
        raise DomainError(f"{predictions.size} predictions for {times.size} records")
    mask = np.asarray(events, dtype=bool) if scope == RmseScope.EVENTS_ONLY else np.ones(times.size, dtype=bool)
    if not mask.any():
        raise DomainError(f"No records in RMSE scope {scope.value}")
    residuals = predictions[mask] - times[mask]
    return float(np.sqrt(np.mean(residuals**2)))


def rmse(
    predictions: Sequence[float] | np.ndarray,
    truth: Sequence[SurvivalRecord],
    scope: RmseScope = RmseScope.EVENTS_ONLY,
) -> float:
    """Root mean squared error against observed times; events_only skips censored records."""
    times = np.array([record.time for record in truth], dtype=float)
    events = np.array([record.is_event for record in truth], dtype=bool)
    return rmse_arrays(np.asarray(predictions, dtype=float), times, events, scope)


@dataclass(frozen=True)
class BenchConfig:
    """Everything needed to re-run one benchmark exactly."""

    methods: tuple[Method, ...] = DEFAULT_METHODS
    aggregations: tuple[Aggregation, ...] = (Aggregation.MEAN_OF_MODE,)
    iterations: int = 10
    ntree: int = 10
    tolerance: float = 0.5
    tree: TreeConfig = field(default_factory=TreeConfig)
    seed: int = 0
    test_fraction: float = 0.3
    stratify: bool = False
    cause: Optional[int] = None
    scope: RmseScope = RmseScope.EVENTS_ONLY
    profile: Optional[tuple[float, ...]] = None
    n_jobs: Optional[int] = 1

    def __post_init__(self) -> None:
        if not self.methods:
            raise ConfigurationError(f"At least one method is required; valid: {', '.join(m.value for m in Method)}")
        if not self.aggregations:
            raise ConfigurationError("At least one aggregation is required")

    def boost_config(self, aggregation: Aggregation) -> BoostConfig:
        return BoostConfig(
            iterations=self.iterations,
            ntree=self.ntree,
            tolerance=self.tolerance,
            aggregation=aggregation,
            seed=self.seed,
            tree=self.tree,
            n_jobs=self.n_jobs,
        )


@dataclass(frozen=True)
class BenchRow:
    method: Method
    aggregation: Aggregation
    train_rmse: float
    test_rmse: float
    seconds: float

    @property
    def label(self) -> str:
        return f"{self.method.value}-{self.aggregation.value}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "aggregation": self.aggregation.value,
            "train_rmse": self.train_rmse,
            "test_rmse": self.test_rmse,
            "seconds": self.seconds,
        }


@dataclass(frozen=True, eq=False)
class BenchReport:
    """Rows per (method, aggregation), run metadata and comparison curves."""

    rows: tuple[BenchRow, ...]
    metadata: dict[str, Any]
    curves: dict[str, SurvivalCurve]

    @property
    def run_name(self) -> str:
        return f"{self.metadata['dataset']}-seed{self.metadata['seed']}"

    def to_dict(self) -> dict[str, Any]:
        return {"metadata": self.metadata, "rows": [row.to_dict() for row in self.rows]}


def _benchmark_sample(data: Dataset, cause: Optional[int]) -> Dataset:
    if cause is not None:
        return recode_for_cause(data, cause)
    return drop_causes(data)


def run_benchmark(data: Dataset, cfg: BenchConfig) -> BenchReport:
    """Fit every (method, aggregation) on the same split; time fit plus test prediction."""
    sample = _benchmark_sample(data, cfg.cause)
    train, test = train_test_split(sample, SplitPlan(cfg.seed, cfg.test_fraction, cfg.stratify))
    train.require_events(2)
    profile = np.asarray(cfg.profile if cfg.profile is not None else test.X.mean(axis=0), dtype=float)
    if profile.size != sample.n_features:
        raise DomainError(f"Profile has {profile.size} values, expected {sample.n_features}")

    curves: dict[str, SurvivalCurve] = {
        "km": kaplan_meier(risk_table_from_arrays(sample.times, sample.events)),
    }
    rows: list[BenchRow] = []
    for method in cfg.methods:
        for aggregation in cfg.aggregations:
            boost_cfg = cfg.boost_config(aggregation)
            started = time.perf_counter()
            model = fit_method(train, method, boost_cfg)
            test_predictions = predict_model(model, test.X, aggregation)
            seconds = round(time.perf_counter() - started, 2)
            train_predictions = predict_model(model, train.X, aggregation)
            row = BenchRow(
                method=method,
                aggregation=aggregation,
                train_rmse=rmse_arrays(train_predictions, train.times, train.events, cfg.scope),
                test_rmse=rmse_arrays(test_predictions, test.times, test.events, cfg.scope),
                seconds=seconds,
            )
            logger.info(
                "%s %s: train RMSE %.3f, test RMSE %.3f, %.2f s",
                method.value,
                aggregation.value,
                row.train_rmse,
                row.test_rmse,
                seconds,
            )
            rows.append(row)
            curves[row.label] = model_survival(model, profile)

    metadata = {
        "dataset": data.name or "dataset",
        "version": __version__,
        "seed": cfg.seed,
        "iterations": cfg.iterations,
        "ntree": cfg.ntree,
        "tolerance": cfg.tolerance,
        "methods": [method.value for method in cfg.methods],
        "aggregations": [aggregation.value for aggregation in cfg.aggregations],
        "cause": cfg.cause,
        "cause_name": data.cause_name(cfg.cause) if cfg.cause is not None else None,
        "scope": cfg.scope.value,
        "test_fraction": cfg.test_fraction,
        "stratify": cfg.stratify,
        "train_size": len(train),
        "test_size": len(test),
        "tree": cfg.tree.to_dict(),
        "threads": cfg.n_jobs,
        "time_unit": data.time_unit,
        "profile": profile.tolist(),
        "data": data.describe(),
    }
    return BenchReport(rows=tuple(rows), metadata=metadata, curves=curves)


def run_directory(base: str | Path, report: BenchReport) -> Path:
    """Output directory ``<base>/<dataset>-seed<seed>``."""
    return Path(base) / report.run_name
