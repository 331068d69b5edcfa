"""Bootstrap functional ANOVA on classification-rate curves.

Each CV repetition yields a curve: the correct classification rate for every
feature method, in a fixed order. Groups of curves (e.g. occluded and
non-occluded) are compared through the weighted pairwise distance of their
mean curves,

    T = sum_{i<j} n_i * ||mean_i - mean_j||^2,

calibrated by resampling curves centred on their own group mean.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

ALPHA = 0.05
MIN_BOOT = 100
# fixed chunking of the bootstrap seed stream, independent of worker count
CHUNK = 256


class CurveParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def curve_norm(x) -> float:
    """Euclidean norm of a curve sampled at its feature-method indices."""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("curve is empty")
    return float(np.sqrt(np.dot(x, x)))


@dataclass(frozen=True, eq=False)
class CurveGroup:
    curves: np.ndarray
    label: str = ""

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.curves, dtype=np.float64))
        if c.ndim != 2 or c.shape[1] < 1:
            raise ValueError("curves must form a (n_curves, length) array with length >= 1")
        if c.shape[0] < 2:
            raise ValueError(f"group {self.label!r} needs at least two curves")
        if not np.isfinite(c).all():
            raise ValueError(f"group {self.label!r} has non-finite values")
        c.setflags(write=False)
        object.__setattr__(self, "curves", c)

    @property
    def n(self) -> int:
        return self.curves.shape[0]

    @property
    def length(self) -> int:
        return self.curves.shape[1]

    def mean(self) -> np.ndarray:
        return self.curves.mean(axis=0)


@dataclass(frozen=True)
class FanovaResult:
    statistic: float
    p_value: float
    n_boot: int
    seed: int

    @property
    def reject(self) -> bool:
        return self.p_value <= ALPHA

    @property
    def verdict(self) -> str:
        return "reject H0" if self.reject else "fail to reject"

    def to_json(self) -> str:
        doc = {
            "statistic": self.statistic, "p_value": self.p_value,
            "n_boot": self.n_boot, "seed": self.seed, "verdict": self.verdict,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def statistic_from_means(means: np.ndarray, sizes) -> np.ndarray:
    """Weighted pairwise statistic; ``means`` is (..., k, L), sizes has length k."""
    k = means.shape[-2]
    total = np.zeros(means.shape[:-2])
    for i in range(k):
        for j in range(i + 1, k):
            diff = means[..., i, :] - means[..., j, :]
            total = total + sizes[i] * np.einsum("...l,...l->...", diff, diff)
    return total


def fanova_statistic(groups) -> float:
    means = np.stack([g.mean() for g in groups])
    return float(statistic_from_means(means, [g.n for g in groups]))


def _check(groups, n_boot):
    groups = list(groups)
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    lengths = {g.length for g in groups}
    if len(lengths) != 1:
        raise ValueError(f"curve lengths differ across groups: {sorted(lengths)}")
    if n_boot < MIN_BOOT:
        raise ValueError(f"n_boot must be at least {MIN_BOOT}")
    return groups


def _boot_chunk(residuals, sizes, n, seed_seq):
    rng = np.random.default_rng(seed_seq)
    means = np.stack(
        [r[rng.integers(0, r.shape[0], size=(n, r.shape[0]))].mean(axis=1) for r in residuals],
        axis=1,
    )
    return statistic_from_means(means, sizes)


def bootstrap_null(groups, n_boot: int, seed: int = 0, jobs: int = 1) -> np.ndarray:
    """Statistic recomputed on within-group resamples of centred curves."""
    groups = _check(groups, n_boot)
    residuals = [g.curves - g.mean() for g in groups]
    sizes = [g.n for g in groups]
    counts = [min(CHUNK, n_boot - s) for s in range(0, n_boot, CHUNK)]
    seqs = np.random.SeedSequence(seed).spawn(len(counts))
    args = [(residuals, sizes, n, s) for n, s in zip(counts, seqs)]
    if jobs > 1 and len(args) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(jobs) as pool:
            parts = list(pool.map(lambda a: _boot_chunk(*a), args))
    else:
        parts = [_boot_chunk(*a) for a in args]
    return np.concatenate(parts)


def fanova_test(groups, n_boot: int = 1000, seed: int = 0, jobs: int = 1) -> FanovaResult:
    """Test equality of group mean curves.

    Returns the observed statistic and the add-one bootstrap p-value
    ``(1 + #{T* >= T}) / (n_boot + 1)``.

    Examples
    --------
    >>> a = CurveGroup([[0.8, 0.9], [0.8, 0.9]])
    >>> r = fanova_test([a, a], n_boot=100)
    >>> r.statistic, r.p_value
    (0.0, 1.0)
    """
    groups = _check(groups, n_boot)
    observed = fanova_statistic(groups)
    null = bootstrap_null(groups, n_boot, seed, jobs)
    # round-off in recomputed means must not push an equal value below T
    tol = 1e-12 * max(observed, float(null.max(initial=0.0)), 1e-300)
    exceed = int(np.count_nonzero(null >= observed - tol))
    return FanovaResult(observed, (1 + exceed) / (n_boot + 1), n_boot, seed)


def read_curves_csv(text: str) -> list[CurveGroup]:
    """Parse curves with a ``group`` column; groups keep first-appearance order."""
    rows = csv.reader(io.StringIO(text))
    try:
        header = next(rows)
    except StopIteration:
        raise CurveParseError("empty input", 1) from None
    header = [h.strip() for h in header]
    if "group" not in header:
        raise CurveParseError("header has no 'group' column", 1)
    gcol = header.index("group")
    width = len(header)
    if width < 2:
        raise CurveParseError("no curve columns", 1)
    data: dict[str, list] = {}
    first_line: dict[str, int] = {}
    for row in rows:
        line = rows.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise CurveParseError(f"expected {width} fields, found {len(row)}", line)
        label = row[gcol].strip()
        if not label:
            raise CurveParseError("missing group label", line)
        values = []
        for col, cell in enumerate(row):
            if col == gcol:
                continue
            try:
                v = float(cell)
            except ValueError:
                raise CurveParseError(f"column {header[col]!r}: not a number: {cell!r}", line) from None
            if not np.isfinite(v):
                raise CurveParseError(f"column {header[col]!r}: non-finite value", line)
            values.append(v)
        data.setdefault(label, []).append(values)
        first_line.setdefault(label, line)
    if not data:
        raise CurveParseError("no data rows", 2)
    for label, curves in data.items():
        if len(curves) < 2:
            raise CurveParseError(f"group {label!r} has fewer than two curves", first_line[label])
    return [CurveGroup(np.array(c), label) for label, c in data.items()]


def write_curves_csv(groups) -> str:
    groups = list(groups)
    length = groups[0].length
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["group"] + [f"m{i}" for i in range(length)])
    for g in groups:
        for curve in g.curves:
            w.writerow([g.label] + [repr(float(v)) for v in curve])
    return out.getvalue()
