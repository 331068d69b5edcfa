"""Gradient-boosted regression trees on the logistic loss.

Second-order boosting in the XGBoost style: each round fits a tree to the
per-sample gradient and hessian of the log-loss, with an L2 penalty on leaf
weights. Every accepted split keeps its gain, which is what feature
importance is built from.
"""

from __future__ import annotations

import numpy as np

from .model import LabeledSet, TrainedModel
from .tree import Newton, Tree, grow_tree, presort


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_loss(margin: np.ndarray, y: np.ndarray) -> float:
    """Mean log-loss for labels in {-1, +1}."""
    return float(np.mean(np.logaddexp(0.0, -y * margin)))


def train_gbt(
    data: LabeledSet,
    n_rounds: int = 100,
    learning_rate: float = 0.1,
    max_depth: int = 3,
    reg_lambda: float = 1.0,
    seed: int = 0,
    min_child_weight: float = 1.0,
    min_split_loss: float = 0.0,
    colsample_bytree: float = 1.0,
) -> TrainedModel:
    """Boost ``n_rounds`` trees on the log-loss.

    ``colsample_bytree`` below 1 gives each tree a random column subset of
    that fraction (drawn from ``seed``), which spreads split gain over many
    more features when columns are numerous and individually weak.
    """
    data.require_trainable()
    if not 0 < colsample_bytree <= 1:
        raise ValueError("colsample_bytree must lie in (0, 1]")
    if n_rounds < 1:
        raise ValueError("n_rounds must be at least 1")
    if reg_lambda < 0:
        raise ValueError("lambda must be non-negative")
    X, y = data.X, data.y
    target = (y > 0).astype(np.float64)
    d = X.shape[1]
    order = presort(X)
    rng = np.random.default_rng(seed)
    n_cols = max(1, int(round(colsample_bytree * d)))
    margin = np.zeros(y.size)
    trees, losses = [], [logistic_loss(margin, y)]
    for _ in range(n_rounds):
        p = sigmoid(margin)
        g = p - target
        h = np.maximum(p * (1.0 - p), 1e-16)
        crit = Newton(g, h, reg_lambda, min_child_weight, min_split_loss)
        if n_cols < d:
            cols = np.sort(rng.choice(d, size=n_cols, replace=False))
            tree = grow_tree(X[:, cols], crit, max_depth=max_depth, order=order[cols])
            inner = tree.feature >= 0
            tree.feature[inner] = cols[tree.feature[inner]]
        else:
            tree = grow_tree(X, crit, max_depth=max_depth, order=order)
        tree.value *= learning_rate
        margin = margin + tree.predict(X)
        trees.append(tree)
        losses.append(logistic_loss(margin, y))
    params = {
        "trees": [t.to_dict() for t in trees],
        "base_margin": 0.0,
        "n_features": X.shape[1],
        "train_loss": losses,
    }
    config = {
        "n_rounds": n_rounds, "learning_rate": learning_rate, "max_depth": max_depth,
        "lambda": reg_lambda, "min_child_weight": min_child_weight,
        "min_split_loss": min_split_loss, "colsample_bytree": colsample_bytree,
    }
    return TrainedModel("gbt", params, config, seed, data.spec_id)


def gbt_trees(model: TrainedModel) -> list[Tree]:
    return [Tree.from_dict(t) for t in model.params["trees"]]


def gbt_scores(model: TrainedModel, X: np.ndarray) -> np.ndarray:
    """Summed leaf scores (the logit); probability is its sigmoid."""
    margin = np.full(X.shape[0], model.params["base_margin"])
    for tree in gbt_trees(model):
        margin += tree.predict(X)
    return margin


def split_log(model: TrainedModel) -> list[tuple[int, int, float]]:
    """(tree index, feature, gain) for every split in the model."""
    out = []
    for t, tree in enumerate(gbt_trees(model)):
        for node in range(tree.n_nodes):
            if tree.feature[node] >= 0:
                out.append((t, int(tree.feature[node]), float(tree.gain[node])))
    return out
