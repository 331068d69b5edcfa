"""Sample manifests and person-disjoint train/test/fold planning."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .imagecore import OcclusionCircle

FEMALE = "female"
MALE = "male"
# class encoding shared by every learner
LABELS = {FEMALE: 1, MALE: -1}

MANIFEST_COLUMNS = ("path", "subject_id", "gender", "eye", "session", "cx", "cy", "r")
_GENDER_TOKENS = {"f": FEMALE, "female": FEMALE, "m": MALE, "male": MALE}
_EYE_TOKENS = {"l": "left", "left": "left", "r": "right", "right": "right"}


class ManifestError(ValueError):
    def __init__(self, message: str, row: int | None = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


@dataclass(frozen=True)
class SampleRecord:
    image_path: str
    subject_id: str
    gender: str
    eye: str
    session: str | None = None
    occlusion: OcclusionCircle | None = None

    def __post_init__(self):
        if not self.subject_id:
            raise ValueError("subject_id must be non-empty")
        if self.gender not in LABELS:
            raise ValueError(f"unknown gender {self.gender!r}")
        if self.eye not in ("left", "right"):
            raise ValueError(f"unknown eye {self.eye!r}")

    @property
    def label(self) -> int:
        return LABELS[self.gender]


def load_manifest(data: bytes | str) -> list[SampleRecord]:
    """Parse manifest CSV text into records, in file order.

    Row numbers in errors count the header as row 1.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    reader = csv.reader(io.StringIO(data, newline=""))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ManifestError("empty manifest") from None
    missing = [c for c in MANIFEST_COLUMNS if c not in header]
    if missing:
        raise ManifestError(f"header lacks columns {missing}", 1)
    col = {name: header.index(name) for name in MANIFEST_COLUMNS}

    records = []
    seen = set()
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            row = row + [""] * (len(header) - len(row))
        get = lambda name: row[col[name]].strip()  # noqa: E731
        path = get("path")
        if not path:
            raise ManifestError("missing path", rowno)
        if path in seen:
            raise ManifestError(f"duplicate path {path!r}", rowno)
        seen.add(path)
        subject = get("subject_id")
        if not subject:
            raise ManifestError("missing subject_id", rowno)
        gender = _GENDER_TOKENS.get(get("gender").lower())
        if gender is None:
            raise ManifestError(f"unknown gender {get('gender')!r}", rowno)
        eye = _EYE_TOKENS.get(get("eye").lower())
        if eye is None:
            raise ManifestError(f"unknown eye {get('eye')!r}", rowno)
        circle_fields = [get("cx"), get("cy"), get("r")]
        occlusion = None
        if any(circle_fields):
            if not all(circle_fields):
                raise ManifestError("cx, cy and r must be given together", rowno)
            try:
                cx, cy, r = (float(v) for v in circle_fields)
                occlusion = OcclusionCircle(cx, cy, r)
            except ValueError as exc:
                raise ManifestError(f"bad occlusion circle: {exc}", rowno) from None
        records.append(
            SampleRecord(path, subject, gender, eye, get("session") or None, occlusion)
        )
    return records


def dump_manifest(records) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(MANIFEST_COLUMNS)
    for rec in records:
        occ = rec.occlusion
        writer.writerow([
            rec.image_path, rec.subject_id, rec.gender, rec.eye, rec.session or "",
            "" if occ is None else repr(float(occ.cx)),
            "" if occ is None else repr(float(occ.cy)),
            "" if occ is None else repr(float(occ.r)),
        ])
    return out.getvalue()


def subject_genders(records) -> dict[str, str]:
    genders: dict[str, str] = {}
    for rec in records:
        prev = genders.setdefault(rec.subject_id, rec.gender)
        if prev != rec.gender:
            raise ManifestError(f"subject {rec.subject_id!r} has conflicting genders")
    return genders


@dataclass(frozen=True)
class SplitPlan:
    train_subjects: frozenset
    test_subjects: frozenset
    folds: tuple = field(default_factory=tuple)
    seed: int = 0

    def __post_init__(self):
        if self.train_subjects & self.test_subjects:
            raise ValueError("train and test subjects overlap")
        for fit_part, val_part in self.folds:
            if fit_part & val_part:
                raise ValueError("fold train and validation subjects overlap")
            if not (fit_part | val_part) <= self.train_subjects:
                raise ValueError("fold subjects must come from the train partition")

    def to_json(self) -> str:
        doc = {
            "version": 1,
            "seed": self.seed,
            "train_subjects": sorted(self.train_subjects),
            "test_subjects": sorted(self.test_subjects),
            "folds": [
                {"train": sorted(a), "validation": sorted(b)} for a, b in self.folds
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SplitPlan":
        doc = json.loads(text)
        if doc.get("version") != 1:
            raise ValueError(f"unsupported split plan version {doc.get('version')!r}")
        folds = tuple(
            (frozenset(f["train"]), frozenset(f["validation"])) for f in doc["folds"]
        )
        return cls(
            frozenset(doc["train_subjects"]),
            frozenset(doc["test_subjects"]),
            folds,
            int(doc["seed"]),
        )


def make_split(records, train_fraction: float = 0.6, k: int = 5, seed: int = 0) -> SplitPlan:
    """Gender-balanced, person-disjoint split with ``k`` validation folds.

    Each gender contributes ``round(train_fraction * n)`` subjects (half to
    even) to the training partition; folds are dealt round-robin per gender.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    if k < 2:
        raise ValueError("k must be at least 2")
    genders = subject_genders(records)
    rng = np.random.default_rng(seed)
    train, test = set(), set()
    folds_val = [set() for _ in range(k)]
    for gender in (FEMALE, MALE):
        subjects = sorted(s for s, g in genders.items() if g == gender)
        n_train = round(train_fraction * len(subjects))
        if n_train < k:
            raise ValueError(
                f"{len(subjects)} {gender} subjects give {n_train} training subjects, "
                f"fewer than k={k} folds"
            )
        order = [subjects[i] for i in rng.permutation(len(subjects))]
        chosen = order[:n_train]
        train.update(chosen)
        test.update(order[n_train:])
        for i, subject in enumerate(chosen):
            folds_val[i % k].add(subject)
    folds = tuple(
        (frozenset(train - val), frozenset(val)) for val in folds_val
    )
    return SplitPlan(frozenset(train), frozenset(test), folds, seed)


def select(records, subjects) -> list[SampleRecord]:
    subjects = set(subjects)
    return [r for r in records if r.subject_id in subjects]
