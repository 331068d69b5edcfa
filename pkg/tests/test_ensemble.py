import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from periocular.learn import ENSEMBLE_KINDS, LabeledSet, train, train_ensemble
from periocular.learn.ensemble import bootstrap_indices, learner_outputs, learner_seeds, vote_fraction
from periocular.learn.tree import Gini, Tree, grow_tree


def _blobs(seed=0, n=60, d=4):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(n) % 2 == 0, 1, -1)
    X = rng.normal(size=(n, d)) + 0.8 * y[:, None]
    return LabeledSet(X, y)


def test_adaboost_perfect_stump_stops_after_one_round():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    m = train_ensemble("adaboost_m1", LabeledSet(X, [-1, -1, 1, 1]), n_learners=50, max_depth=1)
    assert len(m.params["trees"]) == 1
    assert (m.predict(X) == [-1, -1, 1, 1]).all()


def test_bagging_single_learner_equals_tree_on_resample():
    data = _blobs()
    m = train_ensemble("bagging", data, n_learners=1, seed=11)
    (s,) = learner_seeds(11, 1)
    rows = bootstrap_indices(len(data), s)
    tree = grow_tree(data.X[rows], Gini(data.y[rows], np.ones(len(data))))
    assert m.params["trees"][0] == tree.to_dict()


def test_rusboost_rounds_are_balanced():
    rng = np.random.default_rng(4)
    y = np.array([1] * 90 + [-1] * 10)
    X = rng.normal(size=(100, 3)) + 0.5 * y[:, None]
    m = train_ensemble("rusboost", LabeledSet(X, y), n_learners=20)
    counts = m.params["round_class_counts"]
    assert counts and all(c == [10, 10] for c in counts)


@pytest.mark.parametrize("kind", ["adaboost_m1", "logitboost", "gentleboost", "rusboost"])
def test_boosting_weights_normalized(kind):
    m = train_ensemble(kind, _blobs(1), n_learners=15)
    assert all(abs(s - 1.0) <= 1e-12 for s in m.params["weight_sums"])


def test_vote_fraction_matches_manual_tally():
    data = _blobs(2)
    m = train_ensemble("random_forest", data, n_learners=15, seed=3)
    probe = np.random.default_rng(0).normal(size=(7, 4))
    votes = [Tree.from_dict(t).predict(probe) > 0 for t in m.params["trees"]]
    np.testing.assert_array_equal(vote_fraction(m, probe), np.mean(votes, axis=0))
    np.testing.assert_array_equal(m.decision_function(probe), 2 * np.mean(votes, axis=0) - 1)


def test_boosted_score_is_weighted_sum():
    data = _blobs(3)
    m = train_ensemble("adaboost_m1", data, n_learners=10)
    out = learner_outputs(m, data.X)
    np.testing.assert_allclose(m.decision_function(data.X), np.asarray(m.params["alphas"]) @ out)


def test_random_forest_feature_sampling_count():
    m = train_ensemble("random_forest", _blobs(d=10), n_learners=2)
    assert m.params["max_features"] == 4


@pytest.mark.parametrize("kind", ENSEMBLE_KINDS)
def test_ensembles_learn_and_are_deterministic(kind):
    data = _blobs(5, n=80)
    a = train(kind, data, {"n_learners": 20}, seed=7)
    b = train(kind, data, {"n_learners": 20}, seed=7)
    assert a.to_json() == b.to_json()
    assert (a.predict(data.X) == data.y).mean() >= 0.8


def test_parallel_bagging_matches_serial():
    data = _blobs(6)
    a = train_ensemble("random_forest", data, n_learners=8, seed=1, jobs=1)
    b = train_ensemble("random_forest", data, n_learners=8, seed=1, jobs=4)
    assert a.to_json() == b.to_json()


def test_defaults_from_design():
    data = _blobs(7, n=20)
    assert train_ensemble("adaboost_m1", data).config["max_depth"] == 3
    assert train_ensemble("adaboost_m1", data).config["learning_rate"] == 0.1


def test_random_forest_default_size():
    m = train_ensemble("random_forest", _blobs(8, n=20, d=2))
    assert len(m.params["trees"]) == 900


def test_argument_errors():
    data = _blobs()
    with pytest.raises(ValueError):
        train_ensemble("lpboost", data)
    with pytest.raises(ValueError):
        train_ensemble("bagging", data, n_learners=0)
    with pytest.raises(ValueError):
        train_ensemble("gentleboost", data, learning_rate=1.5)


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1))
def test_adaboost_weights_stay_a_distribution(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(30, 2))
    y = rng.choice([-1, 1], 30)
    y[:2] = [1, -1]
    m = train_ensemble("adaboost_m1", LabeledSet(X, y), n_learners=10, max_depth=1)
    assert all(abs(s - 1) <= 1e-12 for s in m.params["weight_sums"])
