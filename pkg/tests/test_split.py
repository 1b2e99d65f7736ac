"""Tests for split statistics and candidate search."""
from __future__ import annotations

import math

import numpy as np
import pytest

from survival_boost.models import SplitRule, Status, SurvivalRecord, TreeVariant
from survival_boost.split import (
    SplitContext,
    best_split,
    logrank_from_arrays,
    logrank_score_statistic,
    logrank_scores,
    logrank_statistic,
)
from survival_boost.utils import ConfigurationError, DomainError

from factories import make_dataset


def _record(time, event, x=0.0):
    return SurvivalRecord((float(x),), float(time), Status.EVENT if event else Status.CENSORED)


def _hand_logrank(times, events, left):
    """Term-by-term evaluation over the parent's distinct event times."""
    numerator = 0.0
    variance = 0.0
    for t in sorted({time for time, event in zip(times, events) if event}):
        at_risk = sum(1 for time in times if time >= t)
        at_risk_left = sum(1 for time, side in zip(times, left) if time >= t and side)
        deaths = sum(1 for time, event in zip(times, events) if time == t and event)
        deaths_left = sum(1 for time, event, side in zip(times, events, left) if time == t and event and side)
        numerator += deaths_left - at_risk_left * deaths / at_risk
        weight = deaths * (at_risk - deaths) / (at_risk - 1) if at_risk > 1 else 0.0
        variance += weight * (at_risk_left / at_risk) * (1 - at_risk_left / at_risk)
    return 0.0 if variance <= 0 else numerator / math.sqrt(variance)


def test_logrank_worked_example():
    parent = [_record(t, True) for t in (1, 2, 3, 4)]
    stat = logrank_statistic(parent, [True, True, False, False])
    assert stat == pytest.approx((7 / 6) / math.sqrt(17 / 36), abs=1e-12)
    assert stat == pytest.approx(1.698, abs=1e-3)


def test_logrank_identical_children_is_zero():
    half = [_record(t, e) for t, e in ((1, True), (2, False), (3, True), (5, True))]
    stat = logrank_statistic(half + half, [True] * 4 + [False] * 4)
    assert stat == pytest.approx(0.0, abs=1e-12)


def test_logrank_single_event_parent_is_finite():
    parent = [_record(1, True), _record(2, False), _record(3, False)]
    stat = logrank_statistic(parent, [True, False, False])
    assert math.isfinite(stat)
    assert stat == pytest.approx(_hand_logrank([1, 2, 3], [True, False, False], [True, False, False]))


def test_logrank_rejects_empty_child_and_no_events():
    parent = [_record(1, True), _record(2, True)]
    with pytest.raises(DomainError):
        logrank_statistic(parent, [True, True])
    with pytest.raises(DomainError):
        logrank_statistic([_record(1, False), _record(2, False)], [True, False])


def test_logrank_matches_hand_evaluation_on_random_nodes():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 200:
        n = int(rng.integers(2, 13))
        times = rng.integers(1, 6, size=n).astype(float)
        events = rng.random(n) < 0.7
        left = rng.random(n) < 0.5
        if not events.any() or left.all() or not left.any():
            continue
        expected = _hand_logrank(times.tolist(), events.tolist(), left.tolist())
        assert logrank_from_arrays(times, events, left) == pytest.approx(expected, abs=1e-10)
        assert logrank_from_arrays(times, events, ~left) == pytest.approx(-expected, abs=1e-10)
        assert logrank_from_arrays(times * 3.5, events, left) == pytest.approx(expected, abs=1e-10)
        checked += 1


def test_logrank_scores_definition():
    times = np.array([1.0, 2.0, 2.0, 4.0])
    events = np.array([True, True, False, True])
    # Nelson-Aalen: 1/4 at 1, 1/4 + 1/3 at 2, + 1/1 at 4
    expected = [1 - 0.25, 1 - (0.25 + 1 / 3), 0 - (0.25 + 1 / 3), 1 - (0.25 + 1 / 3 + 1.0)]
    assert logrank_scores(times, events).tolist() == pytest.approx(expected)


def test_logrank_score_statistic_closed_form():
    parent = [_record(1, True, 0.5), _record(2, True, 1.5), _record(2, False, 2.5), _record(4, True, 3.5)]
    scores = logrank_scores(np.array([1.0, 2.0, 2.0, 4.0]), np.array([True, True, False, True]))
    n1 = 2
    mean = scores.mean()
    variance = scores.var(ddof=1)
    expected = (scores[:2].sum() - n1 * mean) / math.sqrt(n1 * (1 - n1 / 4) * variance)
    assert logrank_score_statistic(parent, 0, 2.0) == pytest.approx(expected)


def test_logrank_score_statistic_degenerate_cases():
    parent = [_record(1, True, 1.0), _record(3, True, 2.0), _record(5, False, 3.0)]
    assert logrank_score_statistic(parent, 0, 0.5) == 0.0
    tied = [_record(2, True, x) for x in (1.0, 2.0, 3.0)]
    assert logrank_score_statistic(tied, 0, 1.5) == 0.0


def _midpoint(lower, upper):
    cut = lower + (upper - lower) / 2.0
    return lower if cut >= upper else cut


def _brute_force_split(X, times, events):
    best = None
    for feature in range(X.shape[1]):
        values = np.unique(X[:, feature])
        for lower, upper in zip(values[:-1], values[1:]):
            cut = _midpoint(lower, upper)
            score = abs(logrank_from_arrays(times, events, X[:, feature] <= cut))
            if best is None or score > best[2] + 1e-10 * max(1.0, best[2]):
                best = (feature, cut, score)
    if best is None or best[2] < 1e-9:
        return None
    return best


def test_best_split_matches_exhaustive_search():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 200:
        n = int(rng.integers(2, 13))
        p = int(rng.integers(1, 4))
        X = rng.integers(0, 5, size=(n, p)).astype(float)
        times = rng.integers(1, 8, size=n).astype(float)
        events = rng.random(n) < 0.7
        if not events.any():
            continue
        data = make_dataset(times, events, X)
        ctx = SplitContext(members=np.arange(n), variant=TreeVariant.RSF, mtry=p, rng_seed=checked)
        found = best_split(ctx, data)
        expected = _brute_force_split(X, times, events)
        if expected is None:
            assert found is None
        else:
            assert found is not None
            assert (found.feature_index, found.cutpoint) == (expected[0], expected[1])
            assert found.score == pytest.approx(expected[2], abs=1e-9)
        checked += 1


def test_best_split_ignores_uninformative_cuts():
    rng = np.random.default_rng(11)
    for _ in range(300):
        half_times = rng.integers(1, 6, size=5).astype(float)
        half_events = rng.random(5) < 0.7
        half_events[0] = True
        times = np.concatenate([half_times, half_times])
        events = np.concatenate([half_events, half_events])
        X = np.repeat([[0.0], [1.0]], 5, axis=0)
        assert logrank_from_arrays(times, events, X[:, 0] <= 0.5) == pytest.approx(0.0, abs=1e-12)
        data = make_dataset(times, events, X)
        ctx = SplitContext(members=np.arange(10), variant=TreeVariant.RSF, mtry=1, rng_seed=0)
        assert best_split(ctx, data) is None


def test_best_split_picks_separating_feature():
    X = [[0.0, 5.0], [0.1, 1.0], [0.2, 4.0], [0.3, 2.0], [1.0, 3.0], [1.1, 6.0], [1.2, 0.0], [1.3, 7.0]]
    times = [1, 1, 1, 1, 10, 10, 10, 10]
    data = make_dataset(times, [True] * 8, X)
    ctx = SplitContext(members=np.arange(8), variant=TreeVariant.RSF, mtry=2, rng_seed=3)
    found = best_split(ctx, data)
    assert found.feature_index == 0
    assert found.cutpoint == pytest.approx(0.65)
    # only the first event time carries variance: 2 / sqrt(16/7 * 1/4)
    assert found.score == pytest.approx(math.sqrt(7.0))


def test_best_split_without_valid_cut_is_none():
    data = make_dataset([1, 2, 3], [True, True, False], [[1.0, 2.0]] * 3)
    ctx = SplitContext(members=np.arange(3), variant=TreeVariant.RSF, mtry=2, rng_seed=0)
    assert best_split(ctx, data) is None
    esf = SplitContext(members=np.arange(3), variant=TreeVariant.ESF, mtry=2, rng_seed=0)
    assert best_split(esf, data) is None


def test_best_split_is_deterministic_and_esf_cuts_stay_in_range():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(30, 4))
    times = np.ceil(rng.exponential(5, size=30))
    events = rng.random(30) < 0.8
    data = make_dataset(times, events, X)
    for variant in (TreeVariant.RSF, TreeVariant.ESF):
        ctx = SplitContext(
            members=np.arange(30), variant=variant, mtry=2, rng_seed=99, cutpoints_per_feature=3
        )
        first = best_split(ctx, data)
        assert first == best_split(ctx, data)
        column = X[:, first.feature_index]
        assert column.min() <= first.cutpoint < column.max()


def test_best_split_logrank_score_rule():
    X = [[float(index)] for index in range(8)]
    data = make_dataset([1, 2, 3, 4, 20, 21, 22, 23], [True] * 8, X)
    ctx = SplitContext(
        members=np.arange(8), variant=TreeVariant.RSF, mtry=1, rng_seed=0, rule=SplitRule.LOGRANK_SCORE
    )
    found = best_split(ctx, data)
    assert found is not None
    assert found.score > 0


def test_split_context_validation():
    with pytest.raises(ConfigurationError):
        SplitContext(members=np.arange(3), variant=TreeVariant.RSF, mtry=0, rng_seed=0)
    with pytest.raises(ConfigurationError):
        SplitContext(members=np.arange(3), variant=TreeVariant.ESF, mtry=1, rng_seed=0, cutpoints_per_feature=0)
    data = make_dataset([1, 2], [True, True], [[0.0], [1.0]])
    with pytest.raises(ConfigurationError):
        best_split(SplitContext(members=np.arange(2), variant=TreeVariant.RSF, mtry=2, rng_seed=0), data)
