"""Node splitting: log-rank (LR) and log-rank score (LRS) statistics.

Candidate scans sort a node once per feature and evaluate every cut from
cumulative sums, so a feature costs O(n * N) for n members and N distinct
event times. Cuts follow the ``x <= c`` convention: the left child holds the
records at or below the cutpoint.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError
from .models import Dataset, SplitRule, SurvivalRecord, TreeVariant

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-10
# cumulative sums leave residue of order 1e-16 on cuts whose statistic is exactly zero
ZERO_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SplitCandidate:
    """A scored (feature, cutpoint) pair."""

    feature_index: int
    cutpoint: float
    score: float


@dataclass(frozen=True, eq=False)
class SplitContext:
    """Everything best_split needs to score one node."""

    members: np.ndarray
    variant: TreeVariant
    mtry: int
    rng_seed: int
    cutpoints_per_feature: int = 1
    rule: SplitRule = SplitRule.LOGRANK

    def __post_init__(self) -> None:
        if self.mtry < 1:
            raise ConfigurationError(f"mtry must be at least 1: {self.mtry}")
        if self.cutpoints_per_feature < 1:
            raise ConfigurationError(f"ESF cutpoints per feature must be at least 1: {self.cutpoints_per_feature}")
        object.__setattr__(self, "members", np.asarray(self.members, dtype=np.int64))


@dataclass(frozen=True, eq=False)
class _NodeTerms:
    """Parent-node quantities shared by every candidate cut."""

    event_times: np.ndarray
    at_risk: np.ndarray
    deaths: np.ndarray
    variance_weights: np.ndarray
    scores: np.ndarray


def _node_terms(times: np.ndarray, events: np.ndarray) -> _NodeTerms:
    event_times = np.unique(times[events])
    sorted_times = np.sort(times)
    at_risk = (times.size - np.searchsorted(sorted_times, event_times, side="left")).astype(float)
    deaths = np.bincount(
        np.searchsorted(event_times, times[events]), minlength=event_times.size
    ).astype(float)
    variance_weights = np.zeros_like(at_risk)
    spread = at_risk > 1
    variance_weights[spread] = (
        deaths[spread] * (at_risk[spread] - deaths[spread]) / (at_risk[spread] - 1.0)
    )
    hazard = np.cumsum(deaths / at_risk)
    positions = np.searchsorted(event_times, times, side="right") - 1
    cumulative = np.where(positions >= 0, hazard[np.clip(positions, 0, None)], 0.0)
    scores = events.astype(float) - cumulative
    return _NodeTerms(event_times, at_risk, deaths, variance_weights, scores)


def logrank_scores(times: np.ndarray, events: np.ndarray) -> np.ndarray:
    """Log-rank scores a_i = delta_i - Lambda(T_i) under the node's Nelson-Aalen estimate."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    if not events.any():
        return np.zeros(times.size)
    return _node_terms(times, events).scores


def logrank_from_arrays(times: np.ndarray, events: np.ndarray, left_mask: np.ndarray) -> float:
    """Signed log-rank statistic of the left child, summed over parent event times."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    left = np.asarray(left_mask, dtype=bool)
    if left.shape != times.shape:
        raise DomainError("left_mask must match the parent size")
    if not left.any() or left.all():
        raise DomainError("Both children must be nonempty")
    if not events.any():
        raise DomainError("Parent node has no events")

    event_times = np.unique(times[events])
    at_risk = (times[:, None] >= event_times[None, :]).sum(axis=0).astype(float)
    at_risk_left = (times[left][:, None] >= event_times[None, :]).sum(axis=0).astype(float)
    deaths = (events[:, None] & (times[:, None] == event_times[None, :])).sum(axis=0).astype(float)
    deaths_left = (events[left][:, None] & (times[left][:, None] == event_times[None, :])).sum(axis=0).astype(float)

    numerator = np.sum(deaths_left - at_risk_left * deaths / at_risk)
    weights = np.zeros_like(at_risk)
    spread = at_risk > 1
    weights[spread] = deaths[spread] * (at_risk[spread] - deaths[spread]) / (at_risk[spread] - 1.0)
    share = at_risk_left / at_risk
    variance = float(np.sum(weights * share * (1.0 - share)))
    if variance <= 0.0:
        return 0.0
    return float(numerator / np.sqrt(variance))


def logrank_statistic(parent: Sequence[SurvivalRecord], left_mask: Sequence[bool]) -> float:
    """Log-rank split statistic for a record collection and a left-child mask."""
    times = np.array([record.time for record in parent], dtype=float)
    events = np.array([record.is_event for record in parent], dtype=bool)
    return logrank_from_arrays(times, events, np.asarray(left_mask, dtype=bool))


def _score_statistic(scores: np.ndarray, left_sums: np.ndarray, left_counts: np.ndarray) -> np.ndarray:
    n = scores.size
    result = np.zeros(left_counts.size)
    if n < 2:
        return result
    mean = scores.mean()
    variance = scores.var(ddof=1)
    if variance <= 1e-15 * max(1.0, float(np.mean(scores**2))):
        return result
    counts = left_counts.astype(float)
    denominator = counts * (1.0 - counts / n) * variance
    valid = denominator > 0
    result[valid] = (left_sums[valid] - counts[valid] * mean) / np.sqrt(denominator[valid])
    return result


def logrank_score_statistic(parent: Sequence[SurvivalRecord], feature: int, cutpoint: float) -> float:
    """Standardized log-rank score statistic for the cut ``x[feature] <= cutpoint``."""
    times = np.array([record.time for record in parent], dtype=float)
    events = np.array([record.is_event for record in parent], dtype=bool)
    values = np.array([record.covariates[feature] for record in parent], dtype=float)
    scores = logrank_scores(times, events)
    left = values <= cutpoint
    left_count = int(left.sum())
    if left_count == 0:
        return 0.0
    stat = _score_statistic(scores, np.array([scores[left].sum()]), np.array([left_count]))
    return float(stat[0])


def _cut_statistics(
    terms: _NodeTerms,
    sorted_times: np.ndarray,
    sorted_scores: np.ndarray,
    left_counts: np.ndarray,
    rule: SplitRule,
) -> np.ndarray:
    """Signed statistics for cuts that put the first ``k`` sorted records left."""
    cumulative_scores = np.cumsum(sorted_scores)
    left_sums = cumulative_scores[left_counts - 1]
    if rule == SplitRule.LOGRANK_SCORE:
        return _score_statistic(sorted_scores, left_sums, left_counts)

    exposure = np.cumsum(sorted_times[:, None] >= terms.event_times[None, :], axis=0)
    share = exposure[left_counts - 1].astype(float) / terms.at_risk[None, :]
    variance = (share * (1.0 - share)) @ terms.variance_weights
    stats = np.zeros(left_counts.size)
    positive = variance > 0
    stats[positive] = left_sums[positive] / np.sqrt(variance[positive])
    return stats


def _midpoints(sorted_values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cut positions and midpoints between consecutive distinct values."""
    boundaries = np.nonzero(sorted_values[1:] > sorted_values[:-1])[0]
    lower = sorted_values[boundaries]
    upper = sorted_values[boundaries + 1]
    cuts = lower + (upper - lower) / 2.0
    cuts = np.where(cuts >= upper, lower, cuts)
    return boundaries + 1, cuts


def _random_cuts(sorted_values: np.ndarray, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    low, high = sorted_values[0], sorted_values[-1]
    cuts = np.sort(rng.uniform(low, high, size=count))
    if low == high:
        return np.empty(0, dtype=np.int64), np.empty(0)
    cuts = cuts[cuts < high]
    return np.searchsorted(sorted_values, cuts, side="right"), cuts


def best_split(ctx: SplitContext, data: Dataset) -> Optional[SplitCandidate]:
    """Highest |statistic| cut over mtry sampled features, or None for a leaf.

    Ties within a relative tolerance go to the lower feature index, then the
    lower cutpoint.
    """
    members = ctx.members
    if ctx.mtry > data.n_features:
        raise ConfigurationError(f"mtry {ctx.mtry} exceeds the feature count {data.n_features}")
    times = data.times[members]
    events = data.events[members]
    if members.size < 2 or not events.any():
        return None

    rng = np.random.default_rng(ctx.rng_seed)
    features = np.sort(rng.choice(data.n_features, size=ctx.mtry, replace=False))
    terms = _node_terms(times, events)
    matrix = data.X[members]

    feature_ids: list[np.ndarray] = []
    cutpoints: list[np.ndarray] = []
    scores: list[np.ndarray] = []
    for feature in features:
        values = matrix[:, feature]
        order = np.argsort(values, kind="stable")
        sorted_values = values[order]
        if ctx.variant == TreeVariant.RSF:
            left_counts, cuts = _midpoints(sorted_values)
        else:
            left_counts, cuts = _random_cuts(sorted_values, ctx.cutpoints_per_feature, rng)
        if cuts.size == 0:
            continue
        stats = _cut_statistics(terms, times[order], terms.scores[order], left_counts, ctx.rule)
        feature_ids.append(np.full(cuts.size, int(feature)))
        cutpoints.append(cuts)
        scores.append(np.abs(stats))

    if not scores:
        return None
    all_scores = np.concatenate(scores)
    all_scores[all_scores < ZERO_TOLERANCE] = 0.0
    best = float(all_scores.max())
    if not np.isfinite(best) or best <= 0.0:
        return None
    winner = int(np.argmax(all_scores >= best - TIE_TOLERANCE * max(1.0, best)))
    candidate = SplitCandidate(
        feature_index=int(np.concatenate(feature_ids)[winner]),
        cutpoint=float(np.concatenate(cutpoints)[winner]),
        score=float(all_scores[winner]),
    )
    logger.debug("Best split %s over %d members", candidate, members.size)
    return candidate
