"""Random and extra survival forests: fitting, ensemble curves and time predictions."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from .errors import ConfigurationError, DomainError
from .estimators import average_curves, survival_from_hazard
from .models import Aggregation, Dataset, SurvivalCurve, TreeVariant
from .tree import SurvivalTree, TreeConfig, drop_down, grow, leaf_indices
from .utils import derive_seed

logger = logging.getLogger(__name__)

FOREST_SCHEMA = "survival-boost/forest/v1"
MAX_REDRAWS = 100


@dataclass(frozen=True, eq=False)
class Forest:
    """A bag of survival trees plus the training event-time vocabulary."""

    trees: tuple[SurvivalTree, ...]
    variant: TreeVariant
    master_seed: int
    vocabulary: np.ndarray
    n_features: int
    config: TreeConfig

    @property
    def ntree(self) -> int:
        return len(self.trees)

    @property
    def in_bag(self) -> tuple[np.ndarray, ...]:
        """Sorted member multiset of every tree."""
        return tuple(
            np.sort(np.concatenate([np.asarray(leaf.members, dtype=np.int64) for leaf in tree.leaves]))
            for tree in self.trees
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": FOREST_SCHEMA,
            "variant": self.variant.value,
            "ntree": self.ntree,
            "master_seed": self.master_seed,
            "vocabulary": self.vocabulary.tolist(),
            "n_features": self.n_features,
            "config": self.config.to_dict(),
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "Forest":
        if payload.get("schema") != FOREST_SCHEMA:
            raise DomainError(f"Unsupported forest schema: {payload.get('schema')!r}")
        trees = tuple(SurvivalTree.from_dict(item) for item in payload["trees"])
        if len(trees) != int(payload["ntree"]):
            raise DomainError("Forest ntree does not match its stored trees")
        return cls(
            trees=trees,
            variant=TreeVariant(payload["variant"]),
            master_seed=int(payload["master_seed"]),
            vocabulary=np.asarray(payload["vocabulary"], dtype=float),
            n_features=int(payload["n_features"]),
            config=TreeConfig.from_dict(payload["config"]),
        )


def bootstrap_indices(n_records: int, seed: int) -> np.ndarray:
    """Sorted sample of size n drawn with replacement."""
    rng = np.random.default_rng(seed)
    return np.sort(rng.integers(0, n_records, size=n_records))


def out_of_bag_fraction(indices: np.ndarray, n_records: int) -> float:
    return 1.0 - np.unique(indices).size / n_records


def _tree_sample(data: Dataset, variant: TreeVariant, seed: int, tree_index: int) -> np.ndarray:
    if variant == TreeVariant.ESF:
        return np.arange(len(data), dtype=np.int64)
    for attempt in range(MAX_REDRAWS):
        indices = bootstrap_indices(len(data), derive_seed(seed, "bootstrap", tree_index, attempt))
        if data.events[indices].any():
            return indices
        logger.debug("Bootstrap %d attempt %d drew no event; redrawing", tree_index, attempt)
    raise DomainError(f"Could not draw a bootstrap sample with an event after {MAX_REDRAWS} attempts")


def fit_forest(
    data: Dataset,
    variant: TreeVariant,
    ntree: int,
    config: Optional[TreeConfig] = None,
    seed: int = 0,
    n_jobs: Optional[int] = 1,
) -> Forest:
    """Fit ntree trees: bootstrap samples for RSF, the full sample for ESF."""
    if ntree < 1:
        raise ConfigurationError(f"ntree must be at least 1: {ntree}")
    data.require_events()
    tree_config = (config or TreeConfig()).with_variant(variant)
    samples = [_tree_sample(data, variant, seed, index) for index in range(ntree)]
    trees = Parallel(n_jobs=n_jobs)(
        delayed(grow)(data, samples[index], tree_config, derive_seed(seed, "tree", index))
        for index in range(ntree)
    )
    logger.debug("Fitted %s forest with %d trees on %d records", variant.value, ntree, len(data))
    return Forest(
        trees=tuple(trees),
        variant=variant,
        master_seed=seed,
        vocabulary=data.event_vocabulary.copy(),
        n_features=data.n_features,
        config=tree_config,
    )


def _as_matrix(forest: Forest, X: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    matrix = np.asarray(X, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[None, :]
    if matrix.ndim != 2 or matrix.shape[1] != forest.n_features:
        raise DomainError(f"Expected {forest.n_features} covariates, got shape {np.shape(X)}")
    return matrix


def _check_vector(forest: Forest, x: Sequence[float] | np.ndarray) -> np.ndarray:
    row = np.asarray(x, dtype=float)
    if row.ndim != 1 or row.size != forest.n_features:
        raise DomainError(f"Expected {forest.n_features} covariates, got {row.size}")
    return row


def ensemble_chf(forest: Forest, x: Sequence[float] | np.ndarray) -> SurvivalCurve:
    """Average of the per-tree leaf cumulative hazards reached by x."""
    row = _check_vector(forest, x)
    return average_curves([drop_down(tree, row).chf for tree in forest.trees])


def ensemble_survival(forest: Forest, x: Sequence[float] | np.ndarray) -> SurvivalCurve:
    return survival_from_hazard(ensemble_chf(forest, x))


def snap_to_vocabulary(values: np.ndarray, vocabulary: np.ndarray) -> np.ndarray:
    """Nearest vocabulary time for each value; equidistant values take the smaller time."""
    values = np.asarray(values, dtype=float)
    if vocabulary.size == 0:
        raise DomainError("Cannot map predictions onto an empty vocabulary")
    upper_index = np.clip(np.searchsorted(vocabulary, values, side="left"), 0, vocabulary.size - 1)
    lower_index = np.clip(upper_index - 1, 0, None)
    lower = vocabulary[lower_index]
    upper = vocabulary[upper_index]
    take_lower = (np.abs(values - lower) <= np.abs(upper - values)) & (lower <= values)
    return np.where(take_lower, lower, upper)


def mean_over_rows(stacked: np.ndarray) -> np.ndarray:
    """Column means that ignore row order and keep unanimous columns exact."""
    means = np.array([math.fsum(column) for column in stacked.T]) / stacked.shape[0]
    unanimous = np.all(stacked == stacked[0], axis=0)
    return np.where(unanimous, stacked[0], means)


def tree_modes(forest: Forest, X: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Leaf mode time per tree (rows) and query (columns)."""
    matrix = _as_matrix(forest, X)
    return np.vstack([tree.leaf_modes[leaf_indices(tree, matrix)] for tree in forest.trees])


def predict_times(
    forest: Forest,
    X: Sequence[Sequence[float]] | np.ndarray,
    aggregation: Aggregation = Aggregation.MEAN_OF_MODE,
) -> np.ndarray:
    """Mean-of-mode (optionally mapped onto the vocabulary) prediction per row."""
    means = mean_over_rows(tree_modes(forest, X))
    if aggregation == Aggregation.MAPPED_MEAN_OF_MODE:
        return snap_to_vocabulary(means, forest.vocabulary)
    return means


def predict_time(
    forest: Forest,
    x: Sequence[float] | np.ndarray,
    aggregation: Aggregation = Aggregation.MEAN_OF_MODE,
) -> float:
    row = _check_vector(forest, x)
    return float(predict_times(forest, row[None, :], aggregation)[0])
