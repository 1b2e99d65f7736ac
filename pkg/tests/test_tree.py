from __future__ import annotations

import numpy as np
import pytest

from survival_boost.estimators import nelson_aalen, risk_table_from_arrays
from survival_boost.models import TreeVariant
from survival_boost.tree import (
    Leaf,
    SplitNode,
    StoppingRule,
    SurvivalTree,
    TreeConfig,
    drop_down,
    grow,
    leaf_indices,
    mode_time,
)
from survival_boost.utils import ConfigurationError, DomainError

from factories import make_dataset, random_dataset

CLUSTERS = make_dataset([1, 1, 1, 1, 10, 10, 10, 10], [True] * 8, [[0.0]] * 4 + [[1.0]] * 4)
FINE = TreeConfig(stopping=StoppingRule(d0=1))


def test_stopping_rule_thresholds():
    rule = StoppingRule(d0=15)
    assert rule.node_event_limit == 10
    assert rule.child_floor == 4
    assert StoppingRule(d0=1).child_floor == 1
    assert StoppingRule(d0=15, min_child_events=2).child_floor == 2


@pytest.mark.parametrize(
    "kwargs",
    [{"d0": 0}, {"max_depth": -1}, {"min_child_events": 0}],
)
def test_stopping_rule_validation(kwargs):
    with pytest.raises(ConfigurationError):
        StoppingRule(**kwargs)


def test_tree_config_mtry():
    assert TreeConfig().resolve_mtry(5) == 3
    assert TreeConfig(mtry=2).resolve_mtry(5) == 2
    with pytest.raises(ConfigurationError):
        TreeConfig(mtry=4).resolve_mtry(3)
    with pytest.raises(ConfigurationError):
        TreeConfig(esf_cutpoints=0)


def test_single_record_tree_is_one_leaf():
    data = make_dataset([7.0], [True], [[0.3]])
    tree = grow(data, [0], FINE, seed=1)
    assert len(tree.nodes) == 1
    leaf = tree.nodes[0]
    assert isinstance(leaf, Leaf)
    assert leaf.mode_time == 7.0
    assert leaf.chf.values.tolist() == [1.0]


def test_separable_clusters_split_once():
    tree = grow(CLUSTERS, np.arange(8), FINE, seed=3)
    root = tree.nodes[0]
    assert isinstance(root, SplitNode)
    assert root.feature == 0
    assert root.cutpoint == pytest.approx(0.5)
    assert tree.depth() == 1
    assert drop_down(tree, [0.0]).mode_time == 1.0
    assert drop_down(tree, [1.0]).mode_time == 10.0


def test_value_on_cutpoint_goes_left():
    tree = grow(CLUSTERS, np.arange(8), FINE, seed=3)
    assert drop_down(tree, [tree.nodes[0].cutpoint]).mode_time == 1.0


@pytest.mark.parametrize(
    "stopping",
    [StoppingRule(d0=15), StoppingRule(d0=1, max_depth=0), StoppingRule(d0=1, min_child_events=2)],
)
def test_stopping_rules_keep_root_as_leaf(stopping):
    tree = grow(CLUSTERS, np.arange(8), TreeConfig(stopping=stopping), seed=3)
    assert len(tree.nodes) == 1
    assert tree.nodes[0].mode_time == 1.0


def test_grow_rejects_empty_or_all_censored_members():
    data = make_dataset([1, 2], [False, True])
    with pytest.raises(DomainError):
        grow(data, [], FINE, seed=0)
    with pytest.raises(DomainError):
        grow(data, [0, 0], FINE, seed=0)


@pytest.mark.parametrize("variant", [TreeVariant.RSF, TreeVariant.ESF])
def test_leaves_partition_members_and_carry_their_hazard(variant):
    data = random_dataset(4, n=80)
    members = np.sort(np.random.default_rng(0).integers(0, 80, size=80))
    tree = grow(data, members, FINE.with_variant(variant), seed=9)
    pooled = np.sort(np.concatenate([np.asarray(leaf.members) for leaf in tree.leaves]))
    assert pooled.tolist() == members.tolist()
    for leaf in tree.leaves:
        rows = np.asarray(leaf.members)
        expected = nelson_aalen(risk_table_from_arrays(data.times[rows], data.events[rows]))
        assert leaf.chf.times.tolist() == expected.times.tolist()
        assert leaf.chf.values.tolist() == pytest.approx(expected.values.tolist())
        if leaf.event_times:
            assert leaf.mode_time == mode_time(leaf.event_times)


def test_grow_is_deterministic():
    data = random_dataset(8)
    first = grow(data, np.arange(len(data)), FINE, seed=21)
    second = grow(data, np.arange(len(data)), FINE, seed=21)
    assert first.to_dict() == second.to_dict()


def test_mode_time_ties_take_smallest():
    assert mode_time([3.0, 1.0, 3.0, 1.0]) == 1.0
    assert mode_time([5.0, 2.0, 5.0]) == 5.0
    with pytest.raises(DomainError):
        mode_time([])


def test_leaf_indices_match_single_drops():
    data = random_dataset(2)
    tree = grow(data, np.arange(len(data)), FINE, seed=5)
    queries = np.random.default_rng(1).normal(size=(25, data.n_features))
    batch = leaf_indices(tree, queries)
    for row, node_id in zip(queries, batch):
        assert drop_down(tree, row) is tree.nodes[node_id]
    with pytest.raises(DomainError):
        drop_down(tree, [0.0])


def test_tree_serialization_preserves_structure():
    data = random_dataset(6)
    tree = grow(data, np.arange(len(data)), FINE, seed=2)
    restored = SurvivalTree.from_dict(tree.to_dict())
    assert restored.to_dict() == tree.to_dict()
    queries = data.X[:10]
    assert restored.leaf_modes[leaf_indices(restored, queries)].tolist() == (
        tree.leaf_modes[leaf_indices(tree, queries)].tolist()
    )
    with pytest.raises(DomainError):
        SurvivalTree.from_dict({"schema": "other"})
