"""Split-gain feature relevance from boosted trees, threshold selection and overlays."""

from __future__ import annotations

import hashlib
import io
from dataclasses import dataclass, field

import numpy as np

from .features import FeatureSpec
from .imagecore import GrayImage, encode_ppm
from .learn import LabeledSet, TrainedModel, train, train_gbt
from .learn.gbt import gbt_trees

FIGURE_TOP_N = (1000, 2000, 3000, 5000, 10000)
TINT = (0, 0, 255)

# Slow, shallow boosting over small column samples: with thousands of weak
# pixel features a fast learner fits the training set within a few rounds and
# later splits chase noise on a handful of hard samples.
RELEVANCE_GBT = {
    "n_rounds": 1000,
    "learning_rate": 0.01,
    "max_depth": 2,
    "min_child_weight": 0.05,
    "colsample_bytree": 0.02,
}


@dataclass(eq=False)
class ImportanceMap:
    scores: np.ndarray
    normalization: str = "unit_sum"

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if (s < 0).any():
            raise ValueError("importance scores must be non-negative")
        if self.normalization not in ("raw_gain", "unit_sum"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        self.scores = s

    def __len__(self):
        return self.scores.size

    @property
    def n_nonzero(self) -> int:
        return int(np.count_nonzero(self.scores))

    def normalized(self) -> "ImportanceMap":
        total = self.scores.sum()
        if total <= 0:
            return ImportanceMap(self.scores.copy(), "unit_sum")
        return ImportanceMap(self.scores / total, "unit_sum")


@dataclass
class SelectionResult:
    threshold: float
    selected: list = field(repr=False)
    n_selected: int
    ccr_after_retrain: float
    degenerate: bool = False
    seed: int = 0


def importance_from_gbt(model: TrainedModel, normalize: bool = True) -> ImportanceMap:
    """Total split gain per feature; features never split score 0."""
    if model.kind != "gbt":
        raise TypeError(f"importance needs a gbt model, got {model.kind!r}")
    scores = np.zeros(model.params["n_features"])
    for tree in gbt_trees(model):
        inner = tree.feature >= 0
        np.add.at(scores, tree.feature[inner], tree.gain[inner])
    imp = ImportanceMap(scores, "raw_gain")
    return imp.normalized() if normalize else imp


def relevance_model(train_set: LabeledSet, seed: int = 0, gbt_config: dict | None = None) -> TrainedModel:
    return train_gbt(train_set, seed=seed, **{**RELEVANCE_GBT, **(gbt_config or {})})


def select_by_threshold(imp: ImportanceMap, threshold: float) -> list[int]:
    """Indices scoring at least ``threshold``, best first, ties by index."""
    s = imp.scores
    keep = np.flatnonzero(s >= threshold)
    order = np.lexsort((keep, -s[keep]))
    return keep[order].tolist()


def ranked(imp: ImportanceMap, top_n: int) -> list[int]:
    return select_by_threshold(imp, 0.0)[:top_n] if top_n > 0 else []


def entry_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def _subset_spec_id(spec_id, cols) -> str:
    digest = hashlib.sha256(np.asarray(cols, dtype=np.int64).tobytes()).hexdigest()[:12]
    return f"{spec_id}+sel{digest}"


def threshold_sweep(
    train_set: LabeledSet,
    test_set: LabeledSet,
    thresholds,
    retrain_kind: str = "svm",
    config: dict | None = None,
    seed: int = 0,
    gbt_config: dict | None = None,
    importance: ImportanceMap | None = None,
) -> list[SelectionResult]:
    """Select features at each threshold, retrain on them and score the test set.

    The boosted-tree relevance model is fitted once on ``train_set`` (with
    ``gbt_config`` overriding :data:`RELEVANCE_GBT`) unless ``importance`` is
    supplied.
    """
    if train_set.spec_id != test_set.spec_id:
        raise ValueError("train and test sets come from different feature specs")
    if importance is None:
        importance = importance_from_gbt(relevance_model(train_set, seed, gbt_config))
    results = []
    for i, thr in enumerate(thresholds):
        s = entry_seed(seed, i)
        cols = select_by_threshold(importance, thr)
        if not cols:
            majority = 1 if (train_set.y > 0).sum() >= (train_set.y < 0).sum() else -1
            ccr = float(np.mean(test_set.y == majority))
            results.append(SelectionResult(float(thr), [], 0, ccr, True, s))
            continue
        sub_id = _subset_spec_id(train_set.spec_id, cols)
        tr = LabeledSet(train_set.X[:, cols], train_set.y, train_set.subject_ids, sub_id)
        model = train(retrain_kind, tr, config, seed=s)
        pred = model.predict(test_set.X[:, cols], sub_id)
        ccr = float(np.mean(pred == test_set.y))
        results.append(SelectionResult(float(thr), cols, len(cols), ccr, False, s))
    return results


def sweep_csv(results) -> str:
    out = io.StringIO()
    out.write("threshold,n_selected,ccr\n")
    for r in results:
        out.write(f"{r.threshold:.5f},{r.n_selected},{100.0 * r.ccr_after_retrain:.2f}\n")
    return out.getvalue()


def overlay_mask(imp: ImportanceMap, spec: FeatureSpec, top_n: int) -> np.ndarray:
    """Boolean ``(height, width)`` mask of pixels covered by the ``top_n`` best features."""
    if len(imp) != spec.length:
        raise ValueError("importance map and spec lengths differ")
    regions = spec.pixel_regions()
    if not all(r is not None for r in regions):
        raise TypeError(f"features of spec {spec.extractor!r} have no pixel loci")
    width, height = _spec_dims(spec)
    mask = np.zeros((height, width), dtype=bool)
    for idx in ranked(imp, top_n):
        r0, r1, c0, c1 = regions[idx]
        mask[r0:r1, c0:c1] = True
    return mask


def _spec_dims(spec: FeatureSpec) -> tuple[int, int]:
    for comp in spec.components():
        if "width" in comp.params:
            return comp.params["width"], comp.params["height"]
    raise TypeError("spec carries no image dimensions")


def render_overlay(
    imp: ImportanceMap, spec: FeatureSpec, top_n: int, base: GrayImage, comment: str | None = None
) -> bytes:
    """Binary PPM of ``base`` with the ``top_n`` features' pixels painted blue."""
    mask = overlay_mask(imp, spec, top_n)
    if mask.shape != base.shape:
        raise ValueError("base image does not match the feature spec dimensions")
    rgb = np.repeat(base.data[:, :, None], 3, axis=2)
    rgb[mask] = TINT
    return encode_ppm(rgb, comment)
