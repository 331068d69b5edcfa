"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line before asserting; the lines are printed
directly and repeated together in the terminal summary.
"""

import json
import time

import numpy as np
import pytest

import oracles
from conftest import random_image
from periocular.cli import main
from periocular.evaluation import ConfusionCounts, metrics
from periocular.fanova import CurveGroup, fanova_test
from periocular.features import gradients, hog_features, hog_window_mass, spec_for, ulbp_concat, ulbp_histogram, ulbp_table, window_edges
from periocular.learn import LabeledSet, train_svm
from periocular.learn.svm import rbf_kernel
from periocular.learn.tree import Gini, find_best_split
from periocular.relevance import ImportanceMap, ranked, select_by_threshold
from periocular.synth import ANNULUS_OUTER, IRIS_RADIUS, radial_distance, SynthConfig

RESULTS = []


def record(capsys, n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS.append(line)
    with capsys.disabled():
        print(f"\n{line}")
    assert ok, line


def test_criterion_01_ulbp_oracle(capsys):
    rng = np.random.default_rng(101)
    images = [random_image(rng, 16, 16) for _ in range(50)]
    t0 = time.perf_counter()
    ours = [ulbp_histogram(img, 1).values for img in images]
    elapsed = time.perf_counter() - t0
    mismatches = sum(
        not np.array_equal(h, oracles.ulbp_histogram(img.data.tolist(), 1)) for h, img in zip(ours, images)
    )
    record(capsys, 1, mismatches == 0 and elapsed < 5.0,
           f"{50 - mismatches}/50 bit-identical histograms, {elapsed:.3f} s")


def test_criterion_02_uniform_census(capsys):
    n_uniform = len(oracles.uniform_patterns())
    n_bins = len(set(ulbp_table().tolist()))
    record(capsys, 2, n_uniform == 58 and n_bins == 59, f"{n_uniform} uniform patterns, {n_bins} bins")


def test_criterion_03_concat_length(capsys):
    n = ulbp_concat(random_image(np.random.default_rng(3))).values.size
    record(capsys, 3, n == 472 and spec_for("ulbp_concat").length == 472, f"length {n}")


def test_criterion_04_hog_length_and_mass(capsys):
    img = random_image(np.random.default_rng(4))
    v, h = gradients(img)
    m = np.zeros((160, 120))
    m[1:-1, 1:-1] = np.sqrt(v * v + h * h)
    worst, lengths = 0.0, []
    for grid in (3, 5, 10):
        lengths.append(len(hog_features(img, grid)))
        mass = hog_window_mass(img, grid).sum(axis=2)
        rows, cols = window_edges(160, grid), window_edges(120, grid)
        for i in range(grid):
            for j in range(grid):
                total = m[rows[i]:rows[i + 1], cols[j]:cols[j + 1]].sum()
                worst = max(worst, abs(mass[i, j] - total) / total)
    ok = lengths == [180, 500, 2000] and worst <= 1e-9
    record(capsys, 4, ok, f"lengths {lengths}, worst relative mass error {worst:.1e}")


def test_criterion_05_smo_vs_qp(capsys):
    rng = np.random.default_rng(505)
    t0 = time.perf_counter()
    worst_obj, sign_mismatch = 0.0, 0
    for _ in range(20):
        n = int(rng.integers(2, 9))
        X = rng.normal(size=(n, 2))
        y = rng.choice([-1, 1], n)
        y[:2] = [1, -1]
        C, gamma = float(rng.choice([0.1, 1.0, 10.0])), 0.5
        model = train_svm(LabeledSet(X, y), C=C, gamma=gamma)
        K = rbf_kernel(X, X, gamma)
        alpha, bias, obj = oracles.svm_dual_qp(K, y, C)
        worst_obj = max(worst_obj, abs(model.params["dual_objective"] - obj))
        probes = rng.uniform(-3, 3, (100, 2))
        ref = rbf_kernel(probes, X, gamma) @ (alpha * y) + bias
        sign_mismatch += int(np.sum(np.sign(model.decision_function(probes)) != np.sign(ref)))
    elapsed = time.perf_counter() - t0
    ok = worst_obj <= 1e-3 and sign_mismatch == 0 and elapsed < 10.0
    record(capsys, 5, ok, f"max |dual gap| {worst_obj:.1e}, {sign_mismatch} sign mismatches, {elapsed:.2f} s")


def test_criterion_06_tree_split_oracle(capsys):
    rng = np.random.default_rng(606)
    matches = 0
    for _ in range(20):
        X = rng.integers(0, 5, (8, 3)).astype(float)
        y = rng.choice([-1, 1], 8)
        y[:2] = [1, -1]
        split = find_best_split(X, np.arange(8), Gini(y, np.ones(8)), 1, np.arange(3))
        gain, f, thr = oracles.best_gini_split(X, y)
        if gain <= 1e-12:
            matches += split is None
        else:
            matches += split is not None and (split.feature, split.threshold) == (f, thr)
    record(capsys, 6, matches == 20, f"{matches}/20 root splits match")


def test_criterion_07_synthetic_benchmark(capsys, tmp_path):
    t0 = time.perf_counter()
    assert main(["synth", "--seed", "0", "--out", str(tmp_path)]) == 0
    config = ["--config", str(tmp_path / "experiment.toml")]
    ccr = {}
    for cond in ("non_occluded", "occluded"):
        assert main(["prepare", *config, "--condition", cond]) == 0
        assert main(["experiment", *config, "--condition", cond]) == 0
        doc = json.loads((tmp_path / "run" / f"report_ulbp_concat_{cond}.json").read_text())
        ccr[cond] = doc["report"]["ccr"]
    assert main(["relevance", *config, "--condition", "non_occluded"]) == 0
    elapsed = time.perf_counter() - t0

    rel = json.loads((tmp_path / "run" / "relevance.json").read_text())
    spec = spec_for(rel["config"]["relevance_extractor"])
    top = ranked(ImportanceMap(rel["importance"]), 1000)
    d = radial_distance(SynthConfig())
    loci = [spec.index_map()[i].locus for i in top]
    dist = np.array([d[row, col] for _, row, col in loci])
    annulus = float(np.mean((dist > IRIS_RADIUS) & (dist <= ANNULUS_OUTER)))
    iris = float(np.mean(dist <= IRIS_RADIUS))
    gap = abs(ccr["non_occluded"] - ccr["occluded"])

    checks = {
        "a": ccr["non_occluded"] >= 0.90,
        "b": gap <= 0.05,
        "c": annulus >= 0.80 and iris <= 0.05,
    }
    detail = (
        f"(a) CCR {100 * ccr['non_occluded']:.2f}%  (b) gap {100 * gap:.2f} pp "
        f"(occluded {100 * ccr['occluded']:.2f}%)  (c) annulus {100 * annulus:.1f}%, "
        f"iris {100 * iris:.1f}% of top-1000  {elapsed:.1f} s"
    )
    record(capsys, 7, all(checks.values()) and elapsed < 300, detail)


def test_criterion_08_threshold_monotonicity(capsys):
    rng = np.random.default_rng(808)
    failures = 0
    for trial in range(100):
        scores = rng.exponential(size=int(rng.integers(1, 400))) * (rng.random() < 0.9)
        imp = ImportanceMap(scores).normalized()
        thresholds = np.sort(rng.uniform(0, 2.0 / scores.size, 10))
        sel = [set(select_by_threshold(imp, t)) for t in thresholds]
        failures += any(not b <= a or len(b) > len(a) for a, b in zip(sel, sel[1:]))
    record(capsys, 8, failures == 0, f"{100 - failures}/100 maps nested and non-increasing")


def test_criterion_09_metric_identities(capsys):
    rng = np.random.default_rng(909)
    bad = 0
    for _ in range(1000):
        tp, fp, tn, fn = (int(v) for v in rng.integers(0, 1000, 4))
        if tp + fp + tn + fn == 0:
            tp = 1
        c = ConfusionCounts(tp, fp, tn, fn)
        m = metrics(c)
        P, N = c.positives, c.negatives
        bad += abs(m.ccr - (m.tpr * P + m.tnr * N) / (P + N)) > 1e-12 or not -1 <= m.mcc <= 1
    exact = metrics(ConfusionCounts(tp=3, tn=2, fp=1, fn=1)).mcc == 5 / 12
    record(capsys, 9, bad == 0 and exact, f"{1000 - bad}/1000 identities hold, MCC(3,2,1,1)=5/12: {exact}")


def test_criterion_10_fanova_calibration(capsys):
    rng = np.random.default_rng(1010)
    grid = np.linspace(0, 1, 12)
    t0 = time.perf_counter()
    rejections = 0
    for rep in range(200):
        def draw():
            # shared mean curve plus independent per-method noise
            return 0.85 + 0.05 * np.sin(2 * np.pi * grid) + 0.02 * rng.normal(size=(10, grid.size))
        r = fanova_test([CurveGroup(draw()), CurveGroup(draw())], n_boot=500, seed=rep)
        rejections += r.reject
    elapsed = time.perf_counter() - t0
    same = CurveGroup(rng.random((10, 12)))
    ident = fanova_test([same, same], n_boot=500)
    rate = rejections / 200
    ok = 0.02 <= rate <= 0.08 and ident.statistic == 0.0 and ident.p_value == 1.0 and elapsed < 30
    record(capsys, 10, ok, f"rejection rate {100 * rate:.1f}%, identical groups T={ident.statistic} "
                           f"p={ident.p_value}, {elapsed:.1f} s")


def test_criterion_11_reproducibility(capsys, tmp_path):
    assert main(["synth", "--seed", "11", "--out", str(tmp_path), "--n-subjects", "20"]) == 0
    (tmp_path / "experiment.toml").write_text(
        'manifest = "manifest.csv"\nseed = 11\nout = "run"\nk = 3\nlearner = "random_forest"\n'
        'params = {n_learners = 25}\n'
    )
    config = ["--config", str(tmp_path / "experiment.toml")]
    assert main(["prepare", *config]) == 0
    archives = []
    for _ in range(2):
        for extractor in ("ulbp_concat", "hog:5"):
            assert main(["experiment", *config, "--extractor", extractor, "--jobs", "2"]) == 0
        archives.append({
            p.name: p.read_bytes() for p in sorted((tmp_path / "run").glob("report_*"))
        })
    ok = len(archives[0]) == 4 and archives[0] == archives[1]
    record(capsys, 11, ok, f"{len(archives[0])} report files, byte-identical rerun: {archives[0] == archives[1]}")
