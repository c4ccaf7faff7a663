"""Classifier input preparation: fixed-shape samples from stroke segments.

Every stroke is normalized to read left-to-right (right-to-left strokes are
mirrored about the frame's vertical axis), fitted to 200 time steps by zero
padding (pre or post) or head truncation, and optionally flattened to a
400-feature vector for distance-based models.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError, FormatError
from .segmenter import StrokeDirection, StrokeOutcome, StrokeSegment
from .trajectory import Trajectory

SEQUENCE_LENGTH = 200
NUM_CHANNELS = 2
PAD_MODES = ("pre", "post")


class StrokeLabel(Enum):
    TOPSPIN = "Topspin"
    BLOCK = "Block"
    PUSH = "Push"
    FLICK = "Flick"
    LOB = "Lob"
    FLAT = "Flat"


LABELS = tuple(StrokeLabel)
LABEL_INDEX = {label: i for i, label in enumerate(LABELS)}


def mirror_x(x, frame_width: int):
    """Reflect pixel x about the frame's vertical axis: x -> (width-1) - x."""
    return (frame_width - 1) - x


@dataclass(frozen=True)
class StrokeSample:
    """A 200x2 (x, y) sequence ready for classification.

    Padded rows are exactly (0, 0) and contiguous: at the head for
    pre-padding, at the tail for post-padding.
    """

    sequence: np.ndarray
    pad_mode: str
    label: StrokeLabel | None = None
    source_id: str = ""

    def __post_init__(self):
        seq = np.ascontiguousarray(self.sequence, dtype=np.float64)
        if seq.shape != (SEQUENCE_LENGTH, NUM_CHANNELS):
            raise DomainError(
                f"sample sequence must be {SEQUENCE_LENGTH}x{NUM_CHANNELS}, got {seq.shape}"
            )
        if self.pad_mode not in PAD_MODES:
            raise DomainError(f"pad_mode must be one of {PAD_MODES}, got {self.pad_mode!r}")
        seq.setflags(write=False)
        object.__setattr__(self, "sequence", seq)

    def nonzero_rows(self) -> int:
        return int(np.count_nonzero(np.any(self.sequence != 0.0, axis=1)))


def fit_length(data: np.ndarray, pad_mode: str) -> np.ndarray:
    """Zero-pad (per pad_mode) or head-truncate to SEQUENCE_LENGTH rows."""
    if pad_mode not in PAD_MODES:
        raise DomainError(f"pad_mode must be one of {PAD_MODES}, got {pad_mode!r}")
    m = len(data)
    if m >= SEQUENCE_LENGTH:
        return np.array(data[:SEQUENCE_LENGTH], dtype=np.float64)
    seq = np.zeros((SEQUENCE_LENGTH, NUM_CHANNELS))
    if pad_mode == "pre":
        seq[SEQUENCE_LENGTH - m:] = data
    else:
        seq[:m] = data
    return seq


def prepare_sample(traj: Trajectory, segment: StrokeSegment, pad_mode: str,
                   frame_width: int | None = None, label: StrokeLabel | None = None,
                   source_id: str = "") -> StrokeSample:
    """Extract, direction-normalize, and length-fit one stroke.

    Recognition operates on valid strokes; segments with any other assigned
    outcome are rejected. Strokes longer than 200 steps keep their first 200
    observations (the onset carries the velocity signature).
    """
    if segment.outcome not in (None, StrokeOutcome.VALID):
        raise DomainError(
            f"recognition expects valid strokes, got outcome {segment.outcome.value}"
        )
    width = traj.frame_width if frame_width is None else frame_width
    t, x, y, _ = traj.detected_arrays()
    mask = (t >= segment.start.t) & (t <= segment.end.t)
    xs, ys = x[mask], y[mask]
    if len(xs) < 5:
        raise DomainError(f"stroke too short: {len(xs)} observations, need at least 5")
    if segment.direction == StrokeDirection.RIGHT_TO_LEFT:
        xs = mirror_x(xs, width)
    data = np.column_stack([xs, ys])
    return StrokeSample(sequence=fit_length(data, pad_mode), pad_mode=pad_mode,
                        label=label, source_id=source_id)


def flatten(sample: StrokeSample) -> np.ndarray:
    """Time-major interleave: x0, y0, x1, y1, ..., length exactly 400."""
    return sample.sequence.reshape(-1).copy()


def repad(sample: StrokeSample, pad_mode: str) -> StrokeSample:
    """Rebuild a sample in the other pad mode by stripping its zero rows.

    Relies on padded rows being exactly (0, 0); genuine (0, 0) observations
    do not occur in generated data.
    """
    rows = np.any(sample.sequence != 0.0, axis=1)
    data = sample.sequence[rows]
    return StrokeSample(sequence=fit_length(data, pad_mode), pad_mode=pad_mode,
                        label=sample.label, source_id=sample.source_id)


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[StrokeSample, ...]
    validation: tuple[StrokeSample, ...]
    seed: int


def split_dataset(samples, seed: int) -> DatasetSplit:
    """Stratified 85/15 split, deterministic for a given seed.

    Within each label the samples are shuffled by a seeded generator and
    85% (rounded down) go to training; every label keeps at least one
    validation sample.
    """
    samples = list(samples)
    ids = [s.source_id for s in samples]
    if len(set(ids)) != len(ids):
        raise DomainError("duplicate source_id in dataset; split would not be disjoint")
    groups: dict[StrokeLabel, list[StrokeSample]] = {}
    for s in samples:
        if s.label is None:
            raise DomainError(f"unlabeled sample {s.source_id!r} cannot be split")
        groups.setdefault(s.label, []).append(s)
    for label, group in groups.items():
        if len(group) < 2:
            raise DomainError(f"label {label.value} has {len(group)} sample(s), need at least 2")
    rng = np.random.default_rng(seed)
    train: list[StrokeSample] = []
    validation: list[StrokeSample] = []
    for label in LABELS:
        group = groups.get(label)
        if not group:
            continue
        perm = rng.permutation(len(group))
        n_train = int(0.85 * len(group))
        train.extend(group[i] for i in perm[:n_train])
        validation.extend(group[i] for i in perm[n_train:])
    return DatasetSplit(train=tuple(train), validation=tuple(validation), seed=seed)


def samples_to_arrays(samples) -> tuple[np.ndarray, np.ndarray]:
    """(N, 200, 2) float array and (N,) int label indices for training."""
    xs = np.stack([s.sequence for s in samples])
    for s in samples:
        if s.label is None:
            raise DomainError(f"unlabeled sample {s.source_id!r} has no target")
    ys = np.array([LABEL_INDEX[s.label] for s in samples], dtype=np.int64)
    return xs, ys


def sample_to_dict(sample: StrokeSample) -> dict:
    return {
        "label": sample.label.value if sample.label is not None else None,
        "pad_mode": sample.pad_mode,
        "source_id": sample.source_id,
        "seq": [[float(a), float(b)] for a, b in sample.sequence],
    }


def sample_from_dict(doc: dict) -> StrokeSample:
    try:
        label = None if doc["label"] is None else StrokeLabel(doc["label"])
        seq = np.asarray(doc["seq"], dtype=np.float64)
        return StrokeSample(sequence=seq, pad_mode=doc["pad_mode"], label=label,
                            source_id=doc["source_id"])
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"malformed dataset record: {exc}") from None


def write_dataset(samples, stream) -> None:
    """JSON-lines dataset: one StrokeSample per line."""
    for s in samples:
        stream.write(json.dumps(sample_to_dict(s)) + "\n")


def read_dataset(stream) -> list[StrokeSample]:
    out = []
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(f"dataset line {lineno}: invalid JSON ({exc})") from None
        out.append(sample_from_dict(doc))
    if not out:
        raise FormatError("dataset file contains no samples")
    return out
