"""K-nearest-neighbor stroke classifier over 400-feature vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, FormatError
from .pipeline import LABELS, StrokeLabel, StrokeSample, flatten

FEATURE_LENGTH = 400
DEFAULT_K = 9


@dataclass
class KnnModel:
    k: int = DEFAULT_K
    store: list[tuple[np.ndarray, StrokeLabel]] = field(default_factory=list)
    input_scaling: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        if self.k < 1:
            raise DomainError(f"k must be positive, got {self.k}")
        if self.store and self.k > len(self.store):
            raise DomainError(f"k={self.k} exceeds store size {len(self.store)}")
        for feats, _ in self.store:
            if len(feats) != FEATURE_LENGTH:
                raise DomainError(
                    f"stored feature vector has length {len(feats)}, expected {FEATURE_LENGTH}"
                )


def train_knn(samples, k: int = DEFAULT_K) -> KnnModel:
    store = []
    for s in samples:
        if s.label is None:
            raise DomainError(f"unlabeled sample {s.source_id!r} cannot enter the store")
        store.append((flatten(s), s.label))
    return KnnModel(k=k, store=store)


def knn_classify(model: KnnModel, features) -> tuple[StrokeLabel, dict[StrokeLabel, int]]:
    """Majority vote of the k nearest stored samples by Euclidean distance.

    Distance ties are broken by lower store index; vote ties by the smaller
    summed distance among the tied labels, then by label enumeration order.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.shape != (FEATURE_LENGTH,):
        raise DomainError(f"query features must have length {FEATURE_LENGTH}, got {f.shape}")
    if not model.store:
        raise DomainError("knn store is empty")
    if model.k > len(model.store):
        raise DomainError(f"k={model.k} exceeds store size {len(model.store)}")
    matrix = np.stack([feats for feats, _ in model.store])
    dists = np.sqrt(np.sum((matrix - f) ** 2, axis=1))
    order = np.argsort(dists, kind="stable")[:model.k]
    votes: dict[StrokeLabel, int] = {}
    summed: dict[StrokeLabel, float] = {}
    for idx in order:
        label = model.store[int(idx)][1]
        votes[label] = votes.get(label, 0) + 1
        summed[label] = summed.get(label, 0.0) + float(dists[idx])
    best_count = max(votes.values())
    tied = [label for label in LABELS if votes.get(label, 0) == best_count]
    winner = min(tied, key=lambda lb: (summed[lb], LABELS.index(lb)))
    return winner, votes


def classify_sample(model: KnnModel, sample: StrokeSample) -> StrokeLabel:
    return knn_classify(model, flatten(sample))[0]


def knn_to_dict(model: KnnModel) -> dict:
    return {
        "schema_version": 1,
        "kind": "knn",
        "input_scaling": list(model.input_scaling),
        "k": model.k,
        "store": [
            {"features": feats.tolist(), "label": label.value}
            for feats, label in model.store
        ],
    }


def knn_from_dict(doc: dict) -> KnnModel:
    try:
        store = [
            (np.asarray(entry["features"], dtype=np.float64), StrokeLabel(entry["label"]))
            for entry in doc["store"]
        ]
        return KnnModel(k=int(doc["k"]), store=store,
                        input_scaling=tuple(doc.get("input_scaling", (1.0, 1.0))))
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"malformed knn model file: {exc}") from None
