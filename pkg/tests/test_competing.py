from __future__ import annotations

import numpy as np
import pytest

from survival_boost.boost import BoostConfig, fit_method
from survival_boost.competing import (
    RECODING,
    CauseSpecificBundle,
    CauseSpecificModel,
    cause_curves,
    fit_all_causes,
    fit_cause_specific,
    recode_for_cause,
)
from survival_boost.models import Aggregation, Method
from survival_boost.tree import StoppingRule, TreeConfig
from survival_boost.utils import DomainError

from factories import make_dataset, random_dataset

CFG = BoostConfig(iterations=2, ntree=3, seed=5, tree=TreeConfig(stopping=StoppingRule(d0=5)))


def _competing():
    return make_dataset(
        [1, 2, 3, 4],
        [True, True, False, True],
        causes=[1, 2, 0, 1],
        cause_names={1: "relapse", 2: "death"},
    )


def test_recode_keeps_target_cause_only():
    data = _competing()
    relapse = recode_for_cause(data, 1)
    assert relapse.events.tolist() == [True, False, False, True]
    assert relapse.times.tolist() == data.times.tolist()
    assert not relapse.competing_risk
    death = recode_for_cause(data, 2)
    assert death.events.tolist() == [False, True, False, False]


def test_recode_rejects_unknown_or_plain_data():
    with pytest.raises(DomainError):
        recode_for_cause(_competing(), 3)
    with pytest.raises(DomainError):
        recode_for_cause(make_dataset([1, 2], [True, False]), 1)


def test_cause_curves_examples():
    data = make_dataset([1, 2], [True, True], causes=[1, 2], cause_names={1: "relapse", 2: "death"})
    curves = cause_curves(data)
    assert curves.incidence[1].evaluate([1.0, 2.0]).tolist() == [0.5, 0.5]
    assert curves.incidence[2].evaluate(2.0) == 0.5
    assert curves.event_free.evaluate(2.0) == 0.0
    assert curves.hazards[1].evaluate(2.0) == 0.5
    assert curves.cause_names == {1: "relapse", 2: "death"}
    only_death = cause_curves(data, [2])
    assert list(only_death.incidence) == [2]


def test_cause_curves_close_to_one():
    data = random_dataset(4, n=80, n_causes=3)
    curves = cause_curves(data)
    grid = curves.event_free.times
    total = curves.event_free.values + sum(curve.evaluate(grid) for curve in curves.incidence.values())
    assert np.max(np.abs(total - 1.0)) <= 1e-10


def test_cause_curves_need_competing_data():
    with pytest.raises(DomainError):
        cause_curves(make_dataset([1, 2], [True, False]))


@pytest.mark.parametrize("engine", [Method.RSF, Method.ESF, Method.ADA_ESF, Method.ADA_MIX])
def test_single_cause_fit_matches_plain_fit(engine):
    plain = random_dataset(9, n=40)
    labelled = make_dataset(
        plain.times,
        plain.events,
        plain.X,
        causes=[1] * len(plain),
        cause_names={1: "death"},
    )
    cause_model = fit_cause_specific(labelled, 1, engine, CFG)
    assert cause_model.cause_name == "death"
    assert cause_model.recoding == RECODING
    assert cause_model.train_events == plain.event_count
    assert cause_model.model.to_dict() == fit_method(plain, engine, CFG).to_dict()


def test_boosted_cause_fit_needs_two_events():
    data = make_dataset([1, 2, 3, 4], [True, True, True, False], causes=[1, 2, 2, 0])
    with pytest.raises(DomainError):
        fit_cause_specific(data, 1, Method.ADA_ESF, CFG)


def test_fit_all_causes_matches_individual_fits():
    data = random_dataset(12, n=60, n_causes=2)
    bundle = fit_all_causes(data, Method.ESF, CFG)
    assert bundle.causes == (1, 2)
    for cause in bundle.causes:
        alone = fit_cause_specific(data, cause, Method.ESF, CFG)
        assert bundle.models[cause].to_dict() == alone.to_dict()
    predictions = bundle.predict(data.X[:5], Aggregation.MEAN_OF_MODE)
    assert sorted(predictions) == [1, 2]
    assert all(values.shape == (5,) for values in predictions.values())


def test_cause_models_serialize():
    data = random_dataset(14, n=60, n_causes=2)
    bundle = fit_all_causes(data, Method.ADA_RSF, CFG)
    restored = CauseSpecificBundle.from_dict(bundle.to_dict())
    assert restored.to_dict() == bundle.to_dict()
    single = CauseSpecificModel.from_dict(bundle.models[2].to_dict())
    assert single.predict(data.X, Aggregation.MEAN_OF_MODE).tolist() == (
        bundle.models[2].predict(data.X, Aggregation.MEAN_OF_MODE).tolist()
    )
    curve = single.survival(data.X[0])
    assert np.all(np.diff(curve.values) <= 0)


def test_fit_all_causes_rejects_plain_data():
    with pytest.raises(DomainError):
        fit_all_causes(random_dataset(1), Method.RSF, CFG)
