"""Tests for forest fitting and aggregation."""
from __future__ import annotations

import numpy as np
import pytest

from survival_boost.estimators import average_curves
from survival_boost.forest import (
    Forest,
    bootstrap_indices,
    ensemble_chf,
    ensemble_survival,
    fit_forest,
    mean_over_rows,
    out_of_bag_fraction,
    predict_time,
    predict_times,
    snap_to_vocabulary,
    tree_modes,
)
from survival_boost.models import Aggregation, TreeVariant
from survival_boost.tree import StoppingRule, TreeConfig, drop_down
from survival_boost.utils import ConfigurationError, DomainError

from factories import make_dataset, random_dataset

SMALL_LEAVES = TreeConfig(stopping=StoppingRule(d0=3))


def test_out_of_bag_fraction_is_near_one_over_e():
    fractions = [out_of_bag_fraction(bootstrap_indices(200, seed), 200) for seed in range(1000)]
    assert np.mean(fractions) == pytest.approx(0.368, abs=0.02)


def test_bootstrap_is_sorted_and_reproducible():
    first = bootstrap_indices(50, 7)
    assert first.tolist() == sorted(first.tolist())
    assert first.tolist() == bootstrap_indices(50, 7).tolist()
    assert first.min() >= 0 and first.max() < 50


def test_esf_trees_use_the_full_sample():
    data = random_dataset(3, n=40)
    forest = fit_forest(data, TreeVariant.ESF, ntree=3, config=SMALL_LEAVES, seed=1)
    for members in forest.in_bag:
        assert members.tolist() == list(range(40))


def test_rsf_trees_use_bootstrap_samples():
    data = random_dataset(3, n=40)
    forest = fit_forest(data, TreeVariant.RSF, ntree=4, config=SMALL_LEAVES, seed=1)
    assert forest.ntree == 4
    assert any(np.unique(members).size < 40 for members in forest.in_bag)
    for members in forest.in_bag:
        assert members.size == 40
        assert data.events[members].any()


def test_fit_is_reproducible_and_thread_independent():
    data = random_dataset(5)
    serial = fit_forest(data, TreeVariant.RSF, ntree=5, config=SMALL_LEAVES, seed=11, n_jobs=1)
    parallel = fit_forest(data, TreeVariant.RSF, ntree=5, config=SMALL_LEAVES, seed=11, n_jobs=2)
    assert serial.to_dict() == parallel.to_dict()
    other = fit_forest(data, TreeVariant.RSF, ntree=5, config=SMALL_LEAVES, seed=12)
    assert other.to_dict() != serial.to_dict()


def test_fit_rejects_bad_inputs():
    data = random_dataset(1)
    with pytest.raises(ConfigurationError):
        fit_forest(data, TreeVariant.RSF, ntree=0)
    censored = make_dataset([1, 2, 3], [False, False, False])
    with pytest.raises(DomainError):
        fit_forest(censored, TreeVariant.ESF, ntree=1)


def test_snap_to_vocabulary_prefers_smaller_on_ties():
    vocabulary = np.array([1.0, 3.0, 6.0])
    snapped = snap_to_vocabulary(np.array([2.0, 2.1, 0.0, 9.0, 4.5, 3.0]), vocabulary)
    assert snapped.tolist() == [1.0, 3.0, 1.0, 6.0, 3.0, 3.0]
    with pytest.raises(DomainError):
        snap_to_vocabulary(np.array([1.0]), np.array([]))


def test_mean_over_rows_keeps_unanimous_columns_exact():
    stacked = np.array([[0.1, 1.0], [0.1, 2.0], [0.1, 4.0]])
    assert mean_over_rows(stacked).tolist() == [0.1, pytest.approx(7 / 3)]
    assert mean_over_rows(stacked[::-1]).tolist() == mean_over_rows(stacked).tolist()


def test_predictions_follow_tree_modes():
    data = random_dataset(9)
    forest = fit_forest(data, TreeVariant.RSF, ntree=6, config=SMALL_LEAVES, seed=4)
    queries = data.X[:15]
    modes = tree_modes(forest, queries)
    assert modes.shape == (6, 15)
    means = predict_times(forest, queries)
    assert means == pytest.approx(modes.mean(axis=0))
    mapped = predict_times(forest, queries, Aggregation.MAPPED_MEAN_OF_MODE)
    assert set(mapped.tolist()) <= set(data.event_vocabulary.tolist())
    assert mapped.tolist() == snap_to_vocabulary(means, forest.vocabulary).tolist()


def test_single_prediction_matches_batch():
    data = random_dataset(10)
    forest = fit_forest(data, TreeVariant.ESF, ntree=4, config=SMALL_LEAVES, seed=2)
    batch = predict_times(forest, data.X)
    for row, expected in zip(data.X, batch):
        assert predict_time(forest, row) == expected
    with pytest.raises(DomainError):
        predict_time(forest, [1.0])
    with pytest.raises(DomainError):
        predict_times(forest, np.zeros((2, 5)))


def test_ensemble_curves_average_tree_hazards():
    data = random_dataset(12)
    forest = fit_forest(data, TreeVariant.RSF, ntree=3, config=SMALL_LEAVES, seed=8)
    x = data.X[0]
    chf = ensemble_chf(forest, x)
    expected = average_curves([drop_down(tree, x).chf for tree in forest.trees])
    assert chf.times.tolist() == expected.times.tolist()
    assert chf.values.tolist() == pytest.approx(expected.values.tolist())
    survival = ensemble_survival(forest, x)
    assert survival.values.tolist() == pytest.approx(np.exp(-chf.values).tolist())
    assert np.all(np.diff(survival.values) <= 0)


def test_forest_serialization():
    data = random_dataset(13)
    forest = fit_forest(data, TreeVariant.ESF, ntree=2, config=SMALL_LEAVES, seed=6)
    restored = Forest.from_dict(forest.to_dict())
    assert restored.to_dict() == forest.to_dict()
    assert predict_times(restored, data.X).tolist() == predict_times(forest, data.X).tolist()
    payload = forest.to_dict()
    payload["ntree"] = 3
    with pytest.raises(DomainError):
        Forest.from_dict(payload)
