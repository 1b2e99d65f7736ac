"""Growing single survival trees and dropping covariate vectors down them."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import ConfigurationError, DomainError
from .estimators import nelson_aalen, risk_table_from_arrays
from .models import Dataset, SplitRule, SurvivalCurve, TreeVariant
from .split import SplitContext, best_split
from .utils import derive_seed

logger = logging.getLogger(__name__)

TREE_SCHEMA = "survival-boost/tree/v1"
IN_BAG_EXPECTATION = 0.632


@dataclass(frozen=True)
class StoppingRule:
    """When a node stops splitting.

    A node with at most ``ceil(0.632 * d0)`` events becomes a leaf, and a
    split is refused when either child would hold fewer distinct event times
    than ``child_floor``.
    """

    d0: int = 15
    max_depth: Optional[int] = None
    min_child_events: Optional[int] = None

    def __post_init__(self) -> None:
        if self.d0 < 1:
            raise ConfigurationError(f"d0 must be at least 1: {self.d0}")
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigurationError(f"max_depth must be non-negative: {self.max_depth}")
        if self.min_child_events is not None and self.min_child_events < 1:
            raise ConfigurationError(f"min_child_events must be at least 1: {self.min_child_events}")

    @property
    def node_event_limit(self) -> int:
        return math.ceil(IN_BAG_EXPECTATION * self.d0)

    @property
    def child_floor(self) -> int:
        if self.min_child_events is not None:
            return self.min_child_events
        return max(1, math.floor(IN_BAG_EXPECTATION * self.d0 / 2))

    def to_dict(self) -> dict[str, Any]:
        return {"d0": self.d0, "max_depth": self.max_depth, "min_child_events": self.min_child_events}

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "StoppingRule":
        return cls(**payload)


@dataclass(frozen=True)
class TreeConfig:
    """Growth settings shared by every tree of a forest."""

    variant: TreeVariant = TreeVariant.RSF
    stopping: StoppingRule = field(default_factory=StoppingRule)
    mtry: Optional[int] = None
    esf_cutpoints: int = 1
    split_rule: SplitRule = SplitRule.LOGRANK

    def __post_init__(self) -> None:
        if self.mtry is not None and self.mtry < 1:
            raise ConfigurationError(f"mtry must be at least 1: {self.mtry}")
        if self.esf_cutpoints < 1:
            raise ConfigurationError(f"esf_cutpoints must be at least 1: {self.esf_cutpoints}")

    def resolve_mtry(self, n_features: int) -> int:
        if n_features < 1:
            raise DomainError("Trees need at least one covariate")
        mtry = self.mtry if self.mtry is not None else math.ceil(math.sqrt(n_features))
        if mtry > n_features:
            raise ConfigurationError(f"mtry {mtry} exceeds the feature count {n_features}")
        return mtry

    def with_variant(self, variant: TreeVariant) -> "TreeConfig":
        return TreeConfig(variant, self.stopping, self.mtry, self.esf_cutpoints, self.split_rule)

    def to_dict(self) -> dict[str, Any]:
        return {
            "variant": self.variant.value,
            "stopping": self.stopping.to_dict(),
            "mtry": self.mtry,
            "esf_cutpoints": self.esf_cutpoints,
            "split_rule": self.split_rule.value,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "TreeConfig":
        return cls(
            variant=TreeVariant(payload["variant"]),
            stopping=StoppingRule.from_dict(payload["stopping"]),
            mtry=payload.get("mtry"),
            esf_cutpoints=int(payload.get("esf_cutpoints", 1)),
            split_rule=SplitRule(payload.get("split_rule", SplitRule.LOGRANK.value)),
        )


@dataclass(frozen=True)
class SplitNode:
    """Internal node: ``x[feature] <= cutpoint`` goes left."""

    feature: int
    cutpoint: float
    left: int
    right: int


@dataclass(frozen=True, eq=False)
class Leaf:
    """Terminal node with its member indices, event-time multiset and CHF."""

    members: tuple[int, ...]
    event_times: tuple[float, ...]
    chf: SurvivalCurve
    mode_time: float


Node = Union[SplitNode, Leaf]


def mode_time(event_times: Sequence[float]) -> float:
    """Most frequent event time; ties go to the smallest time."""
    if len(event_times) == 0:
        raise DomainError("A leaf needs at least one event time")
    values, counts = np.unique(np.asarray(event_times, dtype=float), return_counts=True)
    return float(values[int(np.argmax(counts))])


def leaf_mode_time(leaf: Leaf) -> float:
    return mode_time(leaf.event_times)


@dataclass(frozen=True, eq=False)
class SurvivalTree:
    """Binary survival tree stored as a flat node array rooted at index 0."""

    nodes: tuple[Node, ...]
    config: TreeConfig
    seed: int
    n_features: int

    @cached_property
    def leaf_modes(self) -> np.ndarray:
        modes = np.full(len(self.nodes), np.nan)
        for index, node in enumerate(self.nodes):
            if isinstance(node, Leaf):
                modes[index] = node.mode_time
        return modes

    @property
    def leaves(self) -> list[Leaf]:
        return [node for node in self.nodes if isinstance(node, Leaf)]

    def depth(self) -> int:
        deepest = 0
        stack = [(0, 0)]
        while stack:
            index, level = stack.pop()
            node = self.nodes[index]
            deepest = max(deepest, level)
            if isinstance(node, SplitNode):
                stack.extend([(node.left, level + 1), (node.right, level + 1)])
        return deepest

    def to_dict(self) -> dict[str, Any]:
        nodes: list[dict[str, Any]] = []
        for node in self.nodes:
            if isinstance(node, SplitNode):
                nodes.append(
                    {"type": "split", "feature": node.feature, "cutpoint": node.cutpoint, "left": node.left, "right": node.right}
                )
            else:
                nodes.append(
                    {
                        "type": "leaf",
                        "members": list(node.members),
                        "event_times": list(node.event_times),
                        "chf": node.chf.to_dict(),
                        "mode_time": node.mode_time,
                    }
                )
        return {
            "schema": TREE_SCHEMA,
            "meta": {"config": self.config.to_dict(), "seed": self.seed, "n_features": self.n_features},
            "nodes": nodes,
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "SurvivalTree":
        if payload.get("schema") != TREE_SCHEMA:
            raise DomainError(f"Unsupported tree schema: {payload.get('schema')!r}")
        nodes: list[Node] = []
        for raw in payload["nodes"]:
            if raw["type"] == "split":
                nodes.append(SplitNode(int(raw["feature"]), float(raw["cutpoint"]), int(raw["left"]), int(raw["right"])))
            else:
                nodes.append(
                    Leaf(
                        members=tuple(int(item) for item in raw["members"]),
                        event_times=tuple(float(item) for item in raw["event_times"]),
                        chf=SurvivalCurve.from_dict(raw["chf"]),
                        mode_time=float(raw["mode_time"]),
                    )
                )
        meta = payload["meta"]
        return cls(
            nodes=tuple(nodes),
            config=TreeConfig.from_dict(meta["config"]),
            seed=int(meta["seed"]),
            n_features=int(meta["n_features"]),
        )


def _make_leaf(data: Dataset, members: np.ndarray) -> Leaf:
    times = data.times[members]
    events = data.events[members]
    event_times = tuple(float(value) for value in np.sort(times[events]))
    chf = nelson_aalen(risk_table_from_arrays(times, events))
    return Leaf(
        members=tuple(int(index) for index in members),
        event_times=event_times,
        chf=chf,
        mode_time=mode_time(event_times),
    )


def _distinct_event_times(data: Dataset, members: np.ndarray) -> int:
    events = data.events[members]
    return int(np.unique(data.times[members][events]).size)


def grow(data: Dataset, member_indices: Sequence[int] | np.ndarray, config: TreeConfig, seed: int) -> SurvivalTree:
    """Grow one tree over the given (possibly repeated) record indices."""
    members = np.asarray(member_indices, dtype=np.int64)
    if members.size == 0:
        raise DomainError("Cannot grow a tree on an empty member set")
    if not data.events[members].any():
        raise DomainError("Cannot grow a tree on an all-censored member set")

    mtry = config.resolve_mtry(data.n_features)
    stopping = config.stopping
    nodes: list[Optional[Node]] = [None]
    stack: list[tuple[int, np.ndarray, int]] = [(0, members, 0)]
    while stack:
        node_id, node_members, depth = stack.pop()
        split = None
        node_events = int(data.events[node_members].sum())
        depth_left = stopping.max_depth is None or depth < stopping.max_depth
        if node_events > stopping.node_event_limit and depth_left:
            context = SplitContext(
                members=node_members,
                variant=config.variant,
                mtry=mtry,
                rng_seed=derive_seed(seed, "node", node_id),
                cutpoints_per_feature=config.esf_cutpoints,
                rule=config.split_rule,
            )
            split = best_split(context, data)

        if split is not None:
            goes_left = data.X[node_members, split.feature_index] <= split.cutpoint
            left_members = node_members[goes_left]
            right_members = node_members[~goes_left]
            floor = stopping.child_floor
            if (
                _distinct_event_times(data, left_members) < floor
                or _distinct_event_times(data, right_members) < floor
            ):
                split = None

        if split is None:
            nodes[node_id] = _make_leaf(data, node_members)
            continue

        left_id, right_id = len(nodes), len(nodes) + 1
        nodes.extend([None, None])
        nodes[node_id] = SplitNode(split.feature_index, split.cutpoint, left_id, right_id)
        stack.append((right_id, right_members, depth + 1))
        stack.append((left_id, left_members, depth + 1))

    tree = SurvivalTree(nodes=tuple(nodes), config=config, seed=seed, n_features=data.n_features)
    logger.debug("Grew %s tree: %d nodes, %d leaves", config.variant.value, len(tree.nodes), len(tree.leaves))
    return tree


def _check_width(tree: SurvivalTree, matrix: np.ndarray) -> None:
    if matrix.ndim != 2 or matrix.shape[1] != tree.n_features:
        raise DomainError(f"Expected {tree.n_features} covariates, got shape {matrix.shape}")


def leaf_indices(tree: SurvivalTree, X: np.ndarray) -> np.ndarray:
    """Node index of the leaf reached by each row of X."""
    matrix = np.asarray(X, dtype=float)
    _check_width(tree, matrix)
    result = np.empty(matrix.shape[0], dtype=np.int64)
    stack = [(0, np.arange(matrix.shape[0]))]
    while stack:
        node_id, rows = stack.pop()
        node = tree.nodes[node_id]
        if isinstance(node, Leaf):
            result[rows] = node_id
            continue
        goes_left = matrix[rows, node.feature] <= node.cutpoint
        if goes_left.any():
            stack.append((node.left, rows[goes_left]))
        if not goes_left.all():
            stack.append((node.right, rows[~goes_left]))
    return result


def drop_down(tree: SurvivalTree, x: Sequence[float] | np.ndarray) -> Leaf:
    """Leaf reached by a single covariate vector."""
    row = np.asarray(x, dtype=float)
    if row.ndim != 1 or row.size != tree.n_features:
        raise DomainError(f"Expected {tree.n_features} covariates, got {row.size}")
    node = tree.nodes[int(leaf_indices(tree, row[None, :])[0])]
    assert isinstance(node, Leaf)
    return node
