"""Single CART classifiers and tree ensembles (bagging, random forest, boosting)."""

from __future__ import annotations

import math

import numpy as np

from .model import LabeledSet, TrainedModel, TrainingError
from .tree import Gini, Tree, WeightedMSE, grow_tree

ENSEMBLE_KINDS = ("bagging", "random_forest", "adaboost_m1", "logitboost", "gentleboost", "rusboost")
BOOSTING_KINDS = ("adaboost_m1", "logitboost", "gentleboost", "rusboost")
DEFAULT_N_LEARNERS = {"random_forest": 900}
DEFAULT_BOOST_DEPTH = 3
LOGIT_Z_MAX = 4.0
ERR_FLOOR = 1e-10


def train_tree(data: LabeledSet, max_depth: int = 10, min_leaf: int = 1, seed: int = 0) -> TrainedModel:
    """Gini CART classifier."""
    data.require_trainable()
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    tree = _classification_tree(data.X, data.y, np.ones(len(data)), max_depth, min_leaf)
    config = {"max_depth": max_depth, "min_leaf": min_leaf}
    return TrainedModel("tree", {"tree": tree.to_dict()}, config, seed, data.spec_id)


def _classification_tree(X, y, w, max_depth, min_leaf, rng=None, max_features=None) -> Tree:
    return grow_tree(X, Gini(y, w), max_depth=max_depth, min_leaf=min_leaf, rng=rng, max_features=max_features)


def learner_seeds(seed: int, n: int) -> list[int]:
    """Independent per-learner seeds, stable regardless of how learners are scheduled."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def bootstrap_indices(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, n, size=n)


def train_ensemble(
    kind: str,
    data: LabeledSet,
    n_learners: int | None = None,
    learning_rate: float = 0.1,
    seed: int = 0,
    max_depth: int | None = None,
    min_leaf: int = 1,
    jobs: int = 1,
) -> TrainedModel:
    """Train one of the tree ensembles.

    ``max_depth`` defaults to 3 for boosting kinds and to fully grown trees
    for bagging and random forest.
    """
    if kind not in ENSEMBLE_KINDS:
        raise ValueError(f"unknown ensemble kind {kind!r}")
    data.require_trainable()
    if n_learners is None:
        n_learners = DEFAULT_N_LEARNERS.get(kind, 100)
    if n_learners < 1:
        raise ValueError("n_learners must be at least 1")
    if not 0 < learning_rate <= 1:
        raise ValueError("learning_rate must lie in (0, 1]")
    if max_depth is None and kind in BOOSTING_KINDS:
        max_depth = DEFAULT_BOOST_DEPTH
    config = {
        "n_learners": n_learners, "learning_rate": learning_rate,
        "max_depth": max_depth, "min_leaf": min_leaf,
    }
    if kind in ("bagging", "random_forest"):
        params = _fit_bagged(kind, data, n_learners, seed, max_depth, min_leaf, jobs)
    else:
        fit = {
            "adaboost_m1": _fit_adaboost,
            "rusboost": _fit_adaboost,
            "logitboost": _fit_logitboost,
            "gentleboost": _fit_gentleboost,
        }[kind]
        params = fit(data, n_learners, learning_rate, seed, max_depth, min_leaf, rus=kind == "rusboost")
    return TrainedModel(kind, params, config, seed, data.spec_id)


def _fit_bagged(kind, data, n_learners, seed, max_depth, min_leaf, jobs):
    n, d = data.X.shape
    max_features = math.ceil(math.sqrt(d)) if kind == "random_forest" else None
    seeds = learner_seeds(seed, n_learners)

    def fit_one(s):
        rows = bootstrap_indices(n, s)
        rng = np.random.default_rng([s, 1])
        return _classification_tree(
            data.X[rows], data.y[rows], np.ones(n), max_depth, min_leaf, rng, max_features
        ).to_dict()

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            trees = list(pool.map(fit_one, seeds))
    else:
        trees = [fit_one(s) for s in seeds]
    return {"trees": trees, "learner_seeds": seeds, "max_features": max_features}


def _fit_adaboost(data, n_learners, lr, seed, max_depth, min_leaf, rus=False):
    X, y = data.X, data.y
    n = y.size
    w = np.full(n, 1.0 / n)
    rng = np.random.default_rng(seed)
    trees, alphas, weight_sums, class_counts = [], [], [], []
    for _ in range(n_learners):
        rows = _undersample(y, rng) if rus else np.arange(n)
        sub_w = w[rows] / w[rows].sum()
        tree = _classification_tree(X[rows], y[rows], sub_w, max_depth, min_leaf)
        miss = tree.predict(X) != y
        err = float(w[miss].sum())
        if err >= 0.5:
            if not trees:
                trees.append(tree.to_dict())
                alphas.append(lr * ERR_FLOOR)
            break
        err = max(err, ERR_FLOOR)
        alpha = lr * math.log((1.0 - err) / err)
        trees.append(tree.to_dict())
        alphas.append(alpha)
        if rus:
            class_counts.append([int((y[rows] > 0).sum()), int((y[rows] < 0).sum())])
        if not miss.any():
            weight_sums.append(float(w.sum()))
            break
        w = w * np.exp(alpha * miss)
        w /= w.sum()
        weight_sums.append(float(w.sum()))
    params = {"trees": trees, "alphas": alphas, "weight_sums": weight_sums}
    if rus:
        params["round_class_counts"] = class_counts
    return params


def _undersample(y, rng):
    pos = np.flatnonzero(y > 0)
    neg = np.flatnonzero(y < 0)
    minority, majority = (pos, neg) if pos.size <= neg.size else (neg, pos)
    keep = np.sort(rng.choice(majority, size=minority.size, replace=False))
    return np.sort(np.concatenate([minority, keep]))


def _fit_logitboost(data, n_learners, lr, seed, max_depth, min_leaf, rus=False):
    X, y = data.X, data.y
    target = (y > 0).astype(np.float64)
    F = np.zeros(y.size)
    trees, weight_sums = [], []
    for _ in range(n_learners):
        p = 1.0 / (1.0 + np.exp(-2.0 * F))
        w = np.maximum(p * (1.0 - p), 1e-12)
        z = np.clip((target - p) / w, -LOGIT_Z_MAX, LOGIT_Z_MAX)
        w = w / w.sum()
        weight_sums.append(float(w.sum()))
        tree = grow_tree(X, WeightedMSE(z, w), max_depth=max_depth, min_leaf=min_leaf)
        # F is half the log-odds, so each Newton step enters at half size
        tree.value *= 0.5 * lr
        F = F + tree.predict(X)
        trees.append(tree.to_dict())
    return {"trees": trees, "alphas": [1.0] * len(trees), "weight_sums": weight_sums}


def _fit_gentleboost(data, n_learners, lr, seed, max_depth, min_leaf, rus=False):
    X, y = data.X, data.y
    w = np.full(y.size, 1.0 / y.size)
    trees, weight_sums = [], []
    for _ in range(n_learners):
        tree = grow_tree(X, WeightedMSE(y.astype(np.float64), w), max_depth=max_depth, min_leaf=min_leaf)
        tree.value *= lr
        f = tree.predict(X)
        w = w * np.exp(-y * f)
        w /= w.sum()
        weight_sums.append(float(w.sum()))
        trees.append(tree.to_dict())
    return {"trees": trees, "alphas": [1.0] * len(trees), "weight_sums": weight_sums}


# --- scoring ---------------------------------------------------------------

def tree_scores(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    return Tree.from_dict(model.params["tree"]).predict(X)


def learner_outputs(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """``(n_learners, n_samples)`` raw outputs of every member learner."""
    return np.vstack([Tree.from_dict(t).predict(X) for t in model.params["trees"]])


def vote_fraction(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Share of bagged trees voting female."""
    return (learner_outputs(model, X) > 0).mean(axis=0)


def ensemble_scores(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    if model.kind in ("bagging", "random_forest"):
        return 2.0 * vote_fraction(model, X) - 1.0
    alphas = np.asarray(model.params["alphas"])
    return alphas @ learner_outputs(model, X)
