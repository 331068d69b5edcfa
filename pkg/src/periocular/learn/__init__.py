"""Classifiers: RBF SVM (SMO), CART, tree ensembles and gradient-boosted trees."""

from .ensemble import ENSEMBLE_KINDS, train_ensemble, train_tree
from .gbt import train_gbt
from .model import (
    KINDS,
    LabeledSet,
    SpecMismatchError,
    TrainedModel,
    TrainingError,
    predict,
    score,
)
from .svm import train_svm

__all__ = [
    "ENSEMBLE_KINDS", "KINDS", "LabeledSet", "SpecMismatchError", "TrainedModel",
    "TrainingError", "predict", "score", "scorer_for", "train", "train_ensemble",
    "train_gbt", "train_svm", "train_tree",
]


def scorer_for(kind: str):
    from . import ensemble, gbt, svm

    table = {
        "svm": svm.svm_scores,
        "tree": ensemble.tree_scores,
        "gbt": gbt.gbt_scores,
        **{k: ensemble.ensemble_scores for k in ENSEMBLE_KINDS},
    }
    try:
        return table[kind]
    except KeyError:
        raise ValueError(f"unknown model kind {kind!r}") from None


def train(kind: str, data: LabeledSet, config: dict | None = None, seed: int = 0, jobs: int = 1) -> TrainedModel:
    """Dispatch to the trainer for ``kind`` with keyword hyperparameters from ``config``."""
    config = dict(config or {})
    if kind == "svm":
        return train_svm(data, seed=seed, **config)
    if kind == "tree":
        return train_tree(data, seed=seed, **config)
    if kind == "gbt":
        return train_gbt(data, seed=seed, **config)
    if kind in ENSEMBLE_KINDS:
        return train_ensemble(kind, data, seed=seed, jobs=jobs, **config)
    raise ValueError(f"unknown model kind {kind!r}")
