"""Classification metrics, person-disjoint cross-validation and result tables.

Positive class is female (+1), negative is male (-1). Rates with an empty
denominator are reported as 0, and so is MCC when any of its marginal
products vanishes; the report carries a flag whenever that convention fired.
"""

from __future__ import annotations

import io
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple

import numpy as np

from .dataset import SampleRecord, SplitPlan, select
from .features import extract_matrix
from .learn import LabeledSet, train

# SVM grid: C values and gamma multiples of 1/d
SVM_C_GRID = (1.0, 10.0, 100.0)
SVM_GAMMA_MULTIPLES = (1.0, 2.0, 4.0)
DEFAULT_PARAMS = {"svm": {"standardize": True}}
TABLE_COLUMNS = ("method", "condition", "CCR", "TPR", "TNR", "MCC")


class LeakageError(RuntimeError):
    """A subject appeared on both sides of a train/evaluation partition."""


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    def __post_init__(self):
        for name in ("tp", "fp", "tn", "fn"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")
            object.__setattr__(self, name, int(v))

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ConfusionCounts":
        t = np.asarray(y_true) > 0
        p = np.asarray(y_pred) > 0
        return cls(
            int(np.sum(t & p)), int(np.sum(~t & p)), int(np.sum(~t & ~p)), int(np.sum(t & ~p))
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn}


class Metrics(NamedTuple):
    ccr: float
    tpr: float
    tnr: float
    mcc: float


def mcc_degenerate(c: ConfusionCounts) -> bool:
    """True when the MCC denominator is zero and the value 0 is a convention."""
    return (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn) == 0


def metrics(c: ConfusionCounts) -> Metrics:
    """CCR, TPR, TNR and Matthews correlation of a confusion matrix.

    Examples
    --------
    >>> metrics(ConfusionCounts(tp=3, fp=1, tn=2, fn=1)).mcc == 5 / 12
    True
    """
    if c.total < 1:
        raise ValueError("confusion matrix is empty")
    ccr = (c.tp + c.tn) / c.total
    tpr = c.tp / c.positives if c.positives else 0.0
    tnr = c.tn / c.negatives if c.negatives else 0.0
    # integer products keep the denominator exact for large counts
    den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    mcc = (c.tp * c.tn - c.fp * c.fn) / math.sqrt(den) if den else 0.0
    return Metrics(ccr, tpr, tnr, min(1.0, max(-1.0, mcc)))


def mean_stdev(values) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single value)."""
    values = list(values)
    if not values:
        raise ValueError("no values")
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, sd


def svm_grid(d: int) -> list[dict]:
    return [{"C": C, "gamma": g / d} for C in SVM_C_GRID for g in SVM_GAMMA_MULTIPLES]


@dataclass(frozen=True)
class PipelineConfig:
    """Extractor plus learner; ``params`` fix hyperparameters, ``grid`` lists candidates.

    With ``grid`` left as None an SVM whose ``C`` or ``gamma`` is not fixed
    gets the default search grid; other learners train with ``params`` only.
    """

    extractor: str = "ulbp_concat"
    kind: str = "svm"
    params: Mapping = field(default_factory=dict)
    grid: tuple | None = None
    seed: int = 0

    def learner_params(self) -> dict:
        return {**DEFAULT_PARAMS.get(self.kind, {}), **dict(self.params)}

    def candidates(self, d: int) -> list[dict]:
        base = self.learner_params()
        if self.grid is not None:
            return [{**base, **dict(g)} for g in self.grid]
        if self.kind == "svm" and not {"C", "gamma"} <= base.keys():
            return [{**g, **base} for g in svm_grid(d)]
        return [base]


@dataclass
class FoldResult:
    index: int
    n_fit: int
    n_validation: int
    skipped: bool = False
    reason: str = ""
    counts: ConfusionCounts | None = None

    @property
    def metrics(self) -> Metrics | None:
        return metrics(self.counts) if self.counts is not None else None

    def to_dict(self) -> dict:
        doc = {
            "index": self.index, "n_fit": self.n_fit, "n_validation": self.n_validation,
            "skipped": self.skipped, "reason": self.reason,
        }
        if self.counts is not None:
            doc["counts"] = self.counts.to_dict()
            doc.update(self.metrics._asdict())
        return doc


@dataclass
class EvalReport:
    """Held-out test metrics plus the validation folds of the selected configuration."""

    ccr: float | None
    tpr: float | None
    tnr: float | None
    mcc: float | None
    per_fold: list
    mean_pm: tuple | None
    counts: ConfusionCounts | None = None
    params: dict = field(default_factory=dict)
    grid_scores: list = field(default_factory=list)
    flags: list = field(default_factory=list)
    feature_length: int = 0
    spec_id: str = ""

    def to_dict(self) -> dict:
        return {
            "ccr": self.ccr, "tpr": self.tpr, "tnr": self.tnr, "mcc": self.mcc,
            "counts": self.counts.to_dict() if self.counts is not None else None,
            "per_fold": [f.to_dict() for f in self.per_fold],
            "mean_pm": list(self.mean_pm) if self.mean_pm is not None else None,
            "params": self.params,
            "grid_scores": self.grid_scores,
            "flags": list(self.flags),
            "feature_length": self.feature_length,
            "spec_id": self.spec_id,
        }


def audit_disjoint(fit_subjects, eval_subjects, where: str) -> None:
    shared = set(fit_subjects) & set(eval_subjects)
    if shared:
        raise LeakageError(f"{where}: subjects on both sides: {sorted(shared)[:5]}")


def _evaluate(data: LabeledSet, fit_rows, eval_rows, kind, params, seed, jobs):
    fit = data.subset(fit_rows)
    ev = data.subset(eval_rows)
    audit_disjoint(fit.subject_ids, ev.subject_ids, "partition")
    model = train(kind, fit, params, seed=seed, jobs=jobs)
    pred = model.predict(ev.X, data.spec_id)
    return ConfusionCounts.from_predictions(ev.y, pred)


def _rows(subjects_of_rows, subjects) -> np.ndarray:
    subjects = set(subjects)
    return np.array([i for i, s in enumerate(subjects_of_rows) if s in subjects], dtype=np.intp)


def _fold_skip_reason(data: LabeledSet, fit_rows, val_rows) -> str:
    if val_rows.size == 0:
        return "empty validation partition"
    if fit_rows.size == 0 or np.unique(data.y[fit_rows]).size < 2:
        return "fold training partition has a single class"
    return ""


def run_folds(data: LabeledSet, plan: SplitPlan, kind: str, params: dict, seed: int = 0, jobs: int = 1) -> list[FoldResult]:
    out = []
    for i, (fit_subj, val_subj) in enumerate(plan.folds):
        audit_disjoint(fit_subj, val_subj, f"fold {i}")
        fit_rows = _rows(data.subject_ids, fit_subj)
        val_rows = _rows(data.subject_ids, val_subj)
        reason = _fold_skip_reason(data, fit_rows, val_rows)
        res = FoldResult(i, int(fit_rows.size), int(val_rows.size), bool(reason), reason)
        if not reason:
            res.counts = _evaluate(data, fit_rows, val_rows, kind, params, seed, jobs)
        out.append(res)
    return out


def evaluate_features(data: LabeledSet, plan: SplitPlan, config: PipelineConfig, jobs: int = 1) -> EvalReport:
    """Grid-select on the folds, then train on all train subjects and score the test subjects.

    Rows of ``data`` are assigned to partitions through ``data.subject_ids``.
    """
    audit_disjoint(plan.train_subjects, plan.test_subjects, "train/test split")
    flags = []
    grid_scores = []
    best, best_folds, best_score = None, None, -math.inf
    for params in config.candidates(data.n_features):
        folds = run_folds(data, plan, config.kind, params, config.seed, jobs)
        done = [f.metrics.ccr for f in folds if not f.skipped]
        score = statistics.fmean(done) if done else -math.inf
        grid_scores.append({"params": params, "mean_ccr": score if done else None})
        # strict improvement keeps the first grid point on ties
        if best is None or score > best_score:
            best, best_folds, best_score = params, folds, score
    skipped = [f.index for f in best_folds if f.skipped]
    if skipped:
        flags.append(f"folds skipped: {skipped}")
    done = [f.metrics.ccr for f in best_folds if not f.skipped]
    mean_pm = mean_stdev(done) if done else None

    train_rows = _rows(data.subject_ids, plan.train_subjects)
    test_rows = _rows(data.subject_ids, plan.test_subjects)
    report = EvalReport(
        None, None, None, None, best_folds, mean_pm, None, best, grid_scores, flags,
        data.n_features, data.spec_id or "",
    )
    reason = _fold_skip_reason(data, train_rows, test_rows)
    if reason:
        flags.append(f"final evaluation skipped: {reason.replace('fold ', '')}")
        return report
    counts = _evaluate(data, train_rows, test_rows, config.kind, best, config.seed, jobs)
    m = metrics(counts)
    report.ccr, report.tpr, report.tnr, report.mcc = m
    report.counts = counts
    if mcc_degenerate(counts):
        flags.append("mcc denominator is zero; reported as 0")
    return report


def cross_validate(
    records: list[SampleRecord],
    plan: SplitPlan,
    config: PipelineConfig,
    load_image: Callable,
    jobs: int = 1,
) -> EvalReport:
    """Extract features for the plan's records, then run :func:`evaluate_features`.

    ``load_image`` maps a :class:`SampleRecord` to its :class:`GrayImage`.
    Extraction is per image, so computing it once for every record is the
    same as extracting inside each fold.
    """
    used = select(records, plan.train_subjects | plan.test_subjects)
    if not used:
        raise ValueError("no records belong to the split plan")
    X, spec = extract_matrix([load_image(r) for r in used], config.extractor, jobs)
    data = LabeledSet(X, [r.label for r in used], [r.subject_id for r in used], spec.spec_id)
    return evaluate_features(data, plan, config, jobs)


def _pct(v) -> str:
    return "" if v is None else f"{100.0 * v:.2f}"


def emit_table(reports: Mapping) -> str:
    """CSV with one row per ``(method, condition)`` key, in insertion order.

    Values may be :class:`EvalReport` or :class:`Metrics`. Rates are
    percentages with two decimals; MCC keeps two decimals.
    """
    out = io.StringIO()
    out.write(",".join(TABLE_COLUMNS) + "\n")
    for (method, condition), rep in reports.items():
        mcc = "" if rep.mcc is None else f"{rep.mcc:.2f}"
        out.write(f"{method},{condition},{_pct(rep.ccr)},{_pct(rep.tpr)},{_pct(rep.tnr)},{mcc}\n")
    return out.getvalue()


def report_json(report: EvalReport, extra: Mapping | None = None) -> str:
    """Canonical JSON archive (sorted keys) so identical runs give identical bytes."""
    doc = {**(dict(extra) if extra else {}), "report": report.to_dict()}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
