import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from periocular.features import spec_for
from periocular.imagecore import GrayImage, decode_ppm
from periocular.learn import LabeledSet, TrainedModel, train
from periocular.learn.gbt import split_log
from periocular.relevance import (
    TINT, ImportanceMap, importance_from_gbt, overlay_mask, ranked, render_overlay,
    select_by_threshold, sweep_csv, threshold_sweep,
)


def _stump(feature, gain):
    return {
        "feature": [feature, -1, -1], "threshold": [0.5, 0.0, 0.0], "left": [1, -1, -1],
        "right": [2, -1, -1], "value": [0.0, -0.1, 0.1], "gain": [gain, 0.0, 0.0],
        "n_samples": [4, 2, 2],
    }


def _gbt(trees, n_features):
    params = {"trees": trees, "base_margin": 0.0, "n_features": n_features, "train_loss": []}
    return TrainedModel("gbt", params, {}, 0, None)


def test_single_informative_feature_gets_all_importance():
    rng = np.random.default_rng(0)
    X = np.zeros((40, 12))
    X[:, 7] = rng.normal(size=40)
    y = np.where(X[:, 7] > 0.1, 1, -1)
    m = train("gbt", LabeledSet(X, y), {"n_rounds": 10})
    imp = importance_from_gbt(m)
    assert imp.scores[7] == 1.0
    assert imp.scores.sum() == 1.0


def test_hand_built_split_log_tally():
    m = _gbt([_stump(2, 3.0), _stump(0, 1.0), _stump(2, 4.0)], 4)
    assert split_log(m) == [(0, 2, 3.0), (1, 0, 1.0), (2, 2, 4.0)]
    raw = importance_from_gbt(m, normalize=False)
    np.testing.assert_array_equal(raw.scores, [1.0, 0.0, 7.0, 0.0])
    np.testing.assert_allclose(importance_from_gbt(m).scores, [0.125, 0.0, 0.875, 0.0])
    assert raw.n_nonzero == 2


def test_importance_sums_to_one():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(60, 8))
    y = np.where(X[:, 0] + X[:, 3] > 0, 1, -1)
    imp = importance_from_gbt(train("gbt", LabeledSet(X, y), {"n_rounds": 20}))
    assert abs(imp.scores.sum() - 1.0) <= 1e-9


def test_non_gbt_model_rejected():
    m = train("tree", LabeledSet([[0.0], [1.0]], [-1, 1]))
    with pytest.raises(TypeError):
        importance_from_gbt(m)


def test_threshold_extremes():
    imp = ImportanceMap([0.5, 0.0, 0.3, 0.2])
    assert sorted(select_by_threshold(imp, 0.0)) == [0, 1, 2, 3]
    assert select_by_threshold(imp, 0.51) == []
    assert select_by_threshold(imp, 0.2) == [0, 2, 3]


def test_ranking_ties_by_index():
    imp = ImportanceMap([0.25, 0.25, 0.5, 0.0])
    assert ranked(imp, 3) == [2, 0, 1]
    assert ranked(imp, 0) == []


scores_strategy = arrays(np.float64, st.integers(1, 30), elements=st.floats(0, 1))


@settings(max_examples=60)
@given(scores_strategy, st.floats(0, 1), st.floats(0, 1))
def test_selection_is_nested_and_antitone(scores, t1, t2):
    imp = ImportanceMap(scores)
    lo, hi = min(t1, t2), max(t1, t2)
    a, b = set(select_by_threshold(imp, lo)), set(select_by_threshold(imp, hi))
    assert b <= a


@settings(max_examples=60)
@given(scores_strategy, st.floats(0.01, 100))
def test_normalized_selection_invariant_to_rescaling(scores, k):
    if scores.sum() == 0:
        return
    a = ImportanceMap(scores).normalized()
    b = ImportanceMap(scores * k).normalized()
    np.testing.assert_allclose(a.scores, b.scores, rtol=1e-12, atol=1e-15)
    assert ranked(a, len(scores)) == ranked(ImportanceMap(scores * k), len(scores))


def test_negative_scores_rejected():
    with pytest.raises(ValueError):
        ImportanceMap([0.1, -0.1])


# --- overlays ----------------------------------------------------------------

def _base():
    rng = np.random.default_rng(3)
    return GrayImage.from_array(rng.integers(0, 200, size=(160, 120), dtype=np.uint8))



def test_overlay_zero_is_base_and_full_tints_everything():
    spec = spec_for("raw")
    imp = ImportanceMap(np.random.default_rng(0).random(spec.length))
    assert not overlay_mask(imp, spec, 0).any()
    assert overlay_mask(imp, spec, spec.length).all()


def test_overlay_tints_exactly_the_selected_loci():
    spec = spec_for("hog:3")
    scores = np.zeros(spec.length)
    scores[[0, 25]] = [0.6, 0.4]   # window (0,0) bin 0 and window (0,1) bin 5
    mask = overlay_mask(ImportanceMap(scores), spec, 2)
    regions = spec.pixel_regions()
    expected = np.zeros_like(mask)
    for i in (0, 25):
        r0, r1, c0, c1 = regions[i]
        expected[r0:r1, c0:c1] = True
    np.testing.assert_array_equal(mask, expected)


def test_render_overlay_pixels():
    spec = spec_for("raw")
    base = _base()
    scores = np.zeros(spec.length)
    scores[5] = 1.0
    ppm = render_overlay(ImportanceMap(scores), spec, 1, base)
    body = decode_ppm(ppm)
    assert body.shape == (160, 120, 3)
    assert tuple(body[0, 5]) == TINT
    untouched = np.ones((160, 120), dtype=bool)
    untouched[0, 5] = False
    for ch in range(3):
        np.testing.assert_array_equal(body[..., ch][untouched], base.data[untouched])


def test_overlay_requires_spatial_spec():
    spec = spec_for("intensity_hist")
    with pytest.raises(TypeError):
        overlay_mask(ImportanceMap(np.ones(spec.length)), spec, 5)


# --- sweep ---------------------------------------------------------------------

def _split_sets(seed=0):
    rng = np.random.default_rng(seed)
    y = np.where(np.arange(80) % 2 == 0, 1, -1)
    X = rng.normal(size=(80, 10))
    X[:, 4] += 1.5 * y
    return LabeledSet(X[:60], y[:60], spec_id="s"), LabeledSet(X[60:], y[60:], spec_id="s")


def test_sweep_rows_and_degenerate_entry():
    tr, te = _split_sets()
    imp = ImportanceMap(np.linspace(0.0, 0.2, 10)).normalized()
    res = threshold_sweep(tr, te, [0.0, 0.05, 1.0], importance=imp)
    assert [r.n_selected for r in res] == [10, len(select_by_threshold(imp, 0.05)), 0]
    assert res[2].degenerate and not res[0].degenerate
    assert res[2].ccr_after_retrain == 0.5
    assert sweep_csv(res).count("\n") == 4


def test_sweep_fits_relevance_model_and_finds_signal():
    tr, te = _split_sets(1)
    res = threshold_sweep(tr, te, [0.0, 0.05], gbt_config={"n_rounds": 50, "colsample_bytree": 1.0})
    assert 4 in res[1].selected
    assert res[1].ccr_after_retrain >= 0.75


def test_sweep_rejects_mixed_specs():
    tr, te = _split_sets()
    te = LabeledSet(te.X, te.y, spec_id="other")
    with pytest.raises(ValueError):
        threshold_sweep(tr, te, [0.0])
