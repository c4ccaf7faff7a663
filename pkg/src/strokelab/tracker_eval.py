"""Per-frame ball-tracker evaluation against ground truth.

A predicted center within the pixel threshold of the ground-truth center is
a true positive; a prediction on a negatively labeled frame is a false
positive; a missing prediction on a positively labeled frame is a false
negative; agreement on absence is a true negative. Under the default
"literal" convention a mislocalized detection (both present, distance over
threshold) counts as both a false positive and a false negative; the
"fp-only" convention counts it once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .trajectory import Trajectory

DEFAULT_THRESHOLD_PX = 25.0
CONVENTIONS = ("literal", "fp-only")


@dataclass(frozen=True)
class FramePair:
    frame_index: int
    gt_xy: tuple[float, float] | None
    pred_xy: tuple[float, float] | None

    @property
    def gt_present(self) -> bool:
        return self.gt_xy is not None

    @property
    def pred_present(self) -> bool:
        return self.pred_xy is not None


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise DomainError("confusion counts must be non-negative")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.tn + other.tn,
                               self.fp + other.fp, self.fn + other.fn)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    accuracy: float
    f1: float


def euclidean_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(b[0] - a[0], b[1] - a[1])


def frame_outcome(pair: FramePair, threshold: float = DEFAULT_THRESHOLD_PX,
                  mislocalized: str = "literal") -> ConfusionCounts:
    """One frame's contribution to the confusion counts."""
    if mislocalized not in CONVENTIONS:
        raise DomainError(f"mislocalized must be one of {CONVENTIONS}, got {mislocalized!r}")
    if pair.gt_present and pair.pred_present:
        d = euclidean_distance(pair.gt_xy, pair.pred_xy)
        if d <= threshold:
            return ConfusionCounts(tp=1)
        if mislocalized == "literal":
            return ConfusionCounts(fp=1, fn=1)
        return ConfusionCounts(fp=1)
    if pair.pred_present:
        return ConfusionCounts(fp=1)
    if pair.gt_present:
        return ConfusionCounts(fn=1)
    return ConfusionCounts(tn=1)


def accumulate_outcomes(pairs, threshold: float = DEFAULT_THRESHOLD_PX,
                        mislocalized: str = "literal") -> ConfusionCounts:
    total = ConfusionCounts()
    for pair in pairs:
        total = total + frame_outcome(pair, threshold, mislocalized)
    return total


def compute_metrics(counts: ConfusionCounts) -> Metrics:
    """Precision, recall, accuracy, F1; zero denominators yield 0."""
    if counts.total == 0:
        raise DomainError("cannot compute metrics from all-zero counts")

    def ratio(num: float, den: float) -> float:
        return num / den if den > 0 else 0.0

    precision = ratio(counts.tp, counts.tp + counts.fp)
    recall = ratio(counts.tp, counts.tp + counts.fn)
    accuracy = ratio(counts.tp + counts.tn, counts.total)
    f1 = ratio(2 * precision * recall, precision + recall)
    return Metrics(precision=precision, recall=recall, accuracy=accuracy, f1=f1)


def pairs_from_trajectories(gt: Trajectory, pred: Trajectory) -> list[FramePair]:
    """Align two trajectories on frame index; unmatched indices are an error."""
    gt_by_frame = {o.frame_index: o for o in gt.observations}
    pred_by_frame = {o.frame_index: o for o in pred.observations}
    if set(gt_by_frame) != set(pred_by_frame):
        only_gt = sorted(set(gt_by_frame) - set(pred_by_frame))[:5]
        only_pred = sorted(set(pred_by_frame) - set(gt_by_frame))[:5]
        raise DomainError(
            f"frame indices do not align: only-in-gt {only_gt}, only-in-pred {only_pred}"
        )
    pairs = []
    for frame in sorted(gt_by_frame):
        g = gt_by_frame[frame]
        p = pred_by_frame[frame]
        pairs.append(FramePair(
            frame_index=frame,
            gt_xy=(g.x, g.y) if g.detected else None,
            pred_xy=(p.x, p.y) if p.detected else None,
        ))
    return pairs


def metrics_report(counts: ConfusionCounts, threshold: float,
                   mislocalized: str) -> dict:
    """Report document with raw metrics plus table-style rounded values."""
    m = compute_metrics(counts)
    return {
        "counts": {"tp": counts.tp, "tn": counts.tn, "fp": counts.fp, "fn": counts.fn},
        "metrics": {"precision": m.precision, "recall": m.recall,
                    "accuracy": m.accuracy, "f1": m.f1},
        "display": {"precision": round(m.precision, 4), "recall": round(m.recall, 4),
                    "accuracy_percent": round(100.0 * m.accuracy, 2),
                    "f1": round(m.f1, 4)},
        "convention": mislocalized,
        "threshold_px": threshold,
    }
