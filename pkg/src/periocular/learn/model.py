from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..features import FeatureVector

MODEL_FORMAT_VERSION = 1
KINDS = (
    "svm", "tree", "bagging", "random_forest", "adaboost_m1",
    "logitboost", "gentleboost", "rusboost", "gbt",
)


class TrainingError(ValueError):
    pass


class SpecMismatchError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LabeledSet:
    """Feature matrix with labels in {-1 (male), +1 (female)}."""

    X: np.ndarray
    y: np.ndarray
    subject_ids: tuple = ()
    spec_id: str | None = None

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.asarray(self.y, dtype=np.int64).ravel()
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} vectors but {y.size} labels")
        if not np.isin(y, (-1, 1)).all():
            raise ValueError("labels must be -1 or +1")
        subjects = tuple(self.subject_ids) or tuple(str(i) for i in range(y.size))
        if len(subjects) != y.size:
            raise ValueError("subject_ids must align with labels")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "subject_ids", subjects)

    @classmethod
    def from_vectors(cls, vectors, labels, subject_ids=()):
        vectors = list(vectors)
        spec_ids = {v.spec_id for v in vectors}
        if len(spec_ids) != 1:
            raise SpecMismatchError("vectors come from different feature specs")
        X = np.vstack([v.values for v in vectors])
        return cls(X, labels, subject_ids, spec_ids.pop())

    def __len__(self):
        return self.y.size

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "LabeledSet":
        rows = np.asarray(rows)
        return LabeledSet(
            self.X[rows], self.y[rows], tuple(self.subject_ids[i] for i in rows), self.spec_id
        )

    def columns(self, cols) -> "LabeledSet":
        return LabeledSet(self.X[:, cols], self.y, self.subject_ids, self.spec_id)

    def require_trainable(self) -> None:
        if len(self) < 2:
            raise TrainingError("need at least two samples")
        if np.unique(self.y).size < 2:
            raise TrainingError("training data contains a single class")


@dataclass(eq=False)
class TrainedModel:
    kind: str
    params: dict
    config: dict = field(default_factory=dict)
    seed: int = 0
    spec_id: str | None = None

    def _check(self, X, spec_id):
        if spec_id is not None and self.spec_id is not None and spec_id != self.spec_id:
            raise SpecMismatchError(
                f"model expects spec {self.spec_id}, got vectors from spec {spec_id}"
            )
        return np.atleast_2d(np.asarray(X, dtype=np.float64))

    def decision_function(self, X, spec_id: str | None = None) -> np.ndarray:
        """Real-valued score; positive means female (+1)."""
        from . import scorer_for

        return scorer_for(self.kind)(self, self._check(X, spec_id))

    def predict(self, X, spec_id: str | None = None) -> np.ndarray:
        return np.where(self.decision_function(X, spec_id) >= 0, 1, -1)

    def to_dict(self) -> dict:
        return {
            "version": MODEL_FORMAT_VERSION,
            "kind": self.kind,
            "config": self.config,
            "seed": self.seed,
            "spec_id": self.spec_id,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainedModel":
        if doc.get("version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')!r}")
        if doc["kind"] not in KINDS:
            raise ValueError(f"unknown model kind {doc['kind']!r}")
        return cls(doc["kind"], doc["params"], doc.get("config", {}), doc.get("seed", 0), doc.get("spec_id"))

    @classmethod
    def from_json(cls, text: str) -> "TrainedModel":
        return cls.from_dict(json.loads(text))


def predict(model: TrainedModel, x) -> int:
    """Class label of a single vector; a FeatureVector's spec is checked."""
    if isinstance(x, FeatureVector):
        return int(model.predict(x.values, x.spec_id)[0])
    return int(model.predict(x)[0])


def score(model: TrainedModel, x) -> float:
    if isinstance(x, FeatureVector):
        return float(model.decision_function(x.values, x.spec_id)[0])
    return float(model.decision_function(x)[0])
