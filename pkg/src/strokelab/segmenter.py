"""Stroke segmentation from ball trajectories.

A stroke spans two consecutive windowed extrema of the ball's horizontal
pixel coordinate: it ends at an x-maximum when the ball moved left-to-right
and at an x-minimum when it moved right-to-left. A bounce on the table
shows up as a windowed maximum of the y coordinate (y grows downward).
Outcomes follow the pitch-count rules: one bounce past the net is a valid
stroke, two bounces straddling the net is a serve, no bounce after crossing
is a ball hit long, and a stroke whose end never reaches the net plane went
into the net.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, FormatError
from .trajectory import Trajectory


class ExtremumKind(Enum):
    MINIMUM = "minimum"
    MAXIMUM = "maximum"


class StrokeDirection(Enum):
    LEFT_TO_RIGHT = "LtoR"
    RIGHT_TO_LEFT = "RtoL"


class StrokeOutcome(Enum):
    VALID = "valid"
    SERVE = "serve"
    MISSED_NET = "missed_net"
    MISSED_OUT = "missed_out"


@dataclass(frozen=True)
class ExtremumEvent:
    t: float
    frame_index: int
    value: float
    kind: ExtremumKind


@dataclass(frozen=True)
class PitchEvent:
    t: float
    frame_index: int
    x: float
    y: float


@dataclass(frozen=True)
class StrokeSegment:
    start: ExtremumEvent
    end: ExtremumEvent
    direction: StrokeDirection
    pitches: tuple[PitchEvent, ...] = ()
    outcome: StrokeOutcome | None = None
    annotation: str | None = None

    def __post_init__(self):
        if not self.start.t < self.end.t:
            raise DomainError("stroke start must precede its end")
        if self.start.kind == self.end.kind:
            raise DomainError("stroke boundaries must be extrema of opposite kinds")
        expected = (StrokeDirection.LEFT_TO_RIGHT
                    if self.start.kind == ExtremumKind.MINIMUM
                    else StrokeDirection.RIGHT_TO_LEFT)
        if self.direction != expected:
            raise DomainError("stroke direction inconsistent with boundary extrema kinds")
        counts = {StrokeOutcome.SERVE: 2, StrokeOutcome.VALID: 1, StrokeOutcome.MISSED_OUT: 0}
        if self.outcome in counts and len(self.pitches) != counts[self.outcome]:
            raise DomainError(
                f"outcome {self.outcome.value} requires {counts[self.outcome]} pitch(es), "
                f"got {len(self.pitches)}"
            )


@dataclass(frozen=True)
class SegmenterConfig:
    """Tunable segmentation parameters (times in seconds, distances in pixels).

    Window defaults correspond to 10 and 5 frames at 120 fps. net_x=None
    resolves to frame_width / 2, the net plane for a camera centered on the
    net axis. min_x_travel / min_stroke_duration debounce jitter-induced
    micro-segments; boundary_margin drops bounce candidates that are really
    racket occlusion artifacts at the stroke boundaries.
    """

    boundary_window: float = 0.08333
    pitch_window: float = 0.04167
    boundary_margin: float = 0.05
    net_x: float | None = None
    min_x_travel: float = 200.0
    min_stroke_duration: float = 0.0833
    pitch_reversal_slope: float = 300.0
    boundary_margin_samples: int = 3

    def __post_init__(self):
        for name in ("boundary_window", "pitch_window", "boundary_margin",
                     "min_x_travel", "min_stroke_duration"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.pitch_reversal_slope < 0:
            raise DomainError("pitch_reversal_slope must be non-negative")
        if self.boundary_margin_samples < 0:
            raise DomainError("boundary_margin_samples must be non-negative")
        if self.net_x is not None and self.net_x <= 0:
            raise DomainError("net_x must be positive")

    def resolve(self, traj: Trajectory) -> "SegmenterConfig":
        """Fill net_x from the trajectory's frame width when unset."""
        net = self.net_x if self.net_x is not None else traj.frame_width / 2.0
        if not (0 < net < traj.frame_width):
            raise DomainError(f"net_x={net} outside frame width {traj.frame_width}")
        return replace(self, net_x=float(net))


_KIND_ORDER = {ExtremumKind.MINIMUM: 0, ExtremumKind.MAXIMUM: 1}


def _scan_kind(ts: np.ndarray, vs: np.ndarray, frames: np.ndarray, half: float,
               kind: ExtremumKind) -> list[ExtremumEvent]:
    """One-kind sliding-window scan using a monotonic deque.

    Emits sample i iff it dominates every sample in the open window
    (t[i]-half, t[i]+half), lies at least half a window from both series
    ends, and is the first sample of its tied run.
    """
    n = len(ts)
    maximum = kind == ExtremumKind.MAXIMUM
    events: list[ExtremumEvent] = []
    dq: deque[int] = deque()
    hi = 0
    t0, t_last = ts[0], ts[n - 1]
    for i in range(n):
        ti = ts[i]
        upper = ti + half
        while hi < n and ts[hi] < upper:
            v = vs[hi]
            if maximum:
                while dq and vs[dq[-1]] < v:
                    dq.pop()
            else:
                while dq and vs[dq[-1]] > v:
                    dq.pop()
            dq.append(hi)
            hi += 1
        lower = ti - half
        while dq and ts[dq[0]] <= lower:
            dq.popleft()
        if ti - t0 < half or t_last - ti < half:
            continue
        if i > 0 and vs[i - 1] == vs[i]:
            continue
        if vs[i] == vs[dq[0]]:
            events.append(ExtremumEvent(t=float(ti), frame_index=int(frames[i]),
                                        value=float(vs[i]), kind=kind))
    return events


def _more_extreme(a: ExtremumEvent, b: ExtremumEvent) -> ExtremumEvent:
    """Pick the more extreme of two same-kind events; earlier wins ties."""
    if a.kind == ExtremumKind.MAXIMUM:
        return a if a.value >= b.value else b
    return a if a.value <= b.value else b


def _merge_close(events: list[ExtremumEvent], window: float) -> list[ExtremumEvent]:
    out: list[ExtremumEvent] = []
    for e in events:
        cur = e
        while out and out[-1].kind == cur.kind and (cur.t - out[-1].t) < window:
            prev = out.pop()
            cur = _more_extreme(prev, cur)
        out.append(cur)
    return out


def find_windowed_extrema(series: Sequence[tuple[float, float]], window: float,
                          kind: str = "both",
                          frame_indices: Sequence[int] | None = None
                          ) -> list[ExtremumEvent]:
    """Windowed local extrema of a time series.

    A sample qualifies when it is minimal/maximal over every sample inside
    the centered open window of the given length. Samples closer than half
    a window to either series end are excluded, plateaus resolve to their
    earliest sample, and same-kind neighbours closer than one window merge
    into the more extreme event.
    """
    if window <= 0:
        raise DomainError(f"window must be positive, got {window}")
    if kind not in ("minimum", "maximum", "both"):
        raise DomainError(f"kind must be minimum, maximum, or both, got {kind!r}")
    if len(series) < 2:
        raise DomainError(f"series must have at least 2 samples, got {len(series)}")
    ts = np.asarray([p[0] for p in series], dtype=np.float64)
    vs = np.asarray([p[1] for p in series], dtype=np.float64)
    if np.any(np.diff(ts) <= 0):
        raise DomainError("series must be strictly increasing in time")
    if frame_indices is None:
        frames = np.arange(len(ts), dtype=np.int64)
    else:
        frames = np.asarray(frame_indices, dtype=np.int64)
        if len(frames) != len(ts):
            raise DomainError("frame_indices length must match series length")
    half = window / 2.0
    events: list[ExtremumEvent] = []
    if kind in ("minimum", "both"):
        events.extend(_scan_kind(ts, vs, frames, half, ExtremumKind.MINIMUM))
    if kind in ("maximum", "both"):
        events.extend(_scan_kind(ts, vs, frames, half, ExtremumKind.MAXIMUM))
    events.sort(key=lambda e: (e.t, _KIND_ORDER[e.kind]))
    return _merge_close(events, window)


def _collapse_same_kind(events: list[ExtremumEvent]) -> list[ExtremumEvent]:
    chain: list[ExtremumEvent] = []
    for e in events:
        if chain and chain[-1].kind == e.kind:
            chain[-1] = _more_extreme(chain[-1], e)
        else:
            chain.append(e)
    return chain


def _debounce(chain: list[ExtremumEvent], min_travel: float,
              min_duration: float) -> list[ExtremumEvent]:
    """Remove micro-oscillation pairs until all adjacent pairs are real strokes.

    Dropping both events of an undersized pair keeps the remaining chain
    alternating, so surviving segments stay boundary-linked.
    """
    chain = list(chain)
    while True:
        for i in range(len(chain) - 1):
            a, b = chain[i], chain[i + 1]
            if abs(b.value - a.value) < min_travel or (b.t - a.t) < min_duration:
                del chain[i:i + 2]
                break
        else:
            return chain


def segment_strokes(traj: Trajectory, cfg: SegmenterConfig | None = None
                    ) -> list[StrokeSegment]:
    """Split a fully-detected trajectory into directed stroke segments.

    Outcome and pitches are left unset; see annotate_strokes for the full
    pipeline. Zero segments is a valid result.
    """
    cfg = cfg or SegmenterConfig()
    if not traj.all_detected:
        raise DomainError("trajectory contains undetected frames; run drop_missing first")
    t, x, _, frames = traj.detected_arrays()
    if len(t) < 2:
        return []
    events = find_windowed_extrema(list(zip(t, x)), cfg.boundary_window, "both",
                                   frame_indices=frames)
    chain = _debounce(_collapse_same_kind(events), cfg.min_x_travel,
                      cfg.min_stroke_duration)
    segments = []
    for a, b in zip(chain, chain[1:]):
        direction = (StrokeDirection.LEFT_TO_RIGHT if a.kind == ExtremumKind.MINIMUM
                     else StrokeDirection.RIGHT_TO_LEFT)
        segments.append(StrokeSegment(start=a, end=b, direction=direction))
    return segments


def _fit_slope(ts: np.ndarray, values: np.ndarray) -> float | None:
    """Least-squares slope (units per second); None with fewer than 2 samples."""
    if len(ts) < 2:
        return None
    tc = ts - ts.mean()
    denom = float(np.dot(tc, tc))
    if denom == 0:
        return None
    return float(np.dot(tc, values - values.mean()) / denom)


def detect_pitches(traj: Trajectory, segment: StrokeSegment,
                   cfg: SegmenterConfig | None = None) -> list[PitchEvent]:
    """Windowed y-maxima strictly inside the stroke, margin-filtered.

    Maxima close to the stroke boundaries are racket occlusion artifacts,
    not table contacts, and are discarded: "close" means within
    boundary_margin seconds or among the first/last boundary_margin_samples
    detected samples (occlusion gaps make wall-clock margins porous). A
    surviving maximum must also look like a motion reversal: the fitted
    y-slope over one window before it must reach pitch_reversal_slope (ball
    falling) and the slope after it must reach its negative (ball rising).
    Localization noise on a smooth arc fails that test because its
    neighborhood slopes share one sign.
    """
    cfg = cfg or SegmenterConfig()
    t, x, y, frames = traj.detected_arrays()
    mask = (t > segment.start.t) & (t < segment.end.t)
    if np.count_nonzero(mask) < 2:
        return []
    ts, xs, ys, fs = t[mask], x[mask], y[mask], frames[mask]
    events = find_windowed_extrema(list(zip(ts, ys)), cfg.pitch_window, "maximum",
                                   frame_indices=fs)
    x_by_frame = dict(zip(fs.tolist(), xs.tolist()))
    k = cfg.boundary_margin_samples
    t_lo = ts[k] if k < len(ts) else np.inf
    t_hi = ts[len(ts) - 1 - k] if k < len(ts) else -np.inf
    window = cfg.pitch_window
    pitches = []
    for e in events:
        if (e.t - segment.start.t) <= cfg.boundary_margin:
            continue
        if (segment.end.t - e.t) <= cfg.boundary_margin:
            continue
        if e.t < t_lo or e.t > t_hi:
            continue
        before = (ts >= e.t - window) & (ts < e.t)
        after = (ts > e.t) & (ts <= e.t + window)
        slope_in = _fit_slope(ts[before], ys[before])
        slope_out = _fit_slope(ts[after], ys[after])
        if slope_in is None or slope_out is None:
            continue
        if slope_in < cfg.pitch_reversal_slope or slope_out > -cfg.pitch_reversal_slope:
            continue
        pitches.append(PitchEvent(t=e.t, frame_index=e.frame_index,
                                  x=x_by_frame[e.frame_index], y=e.value))
    return pitches


def classify_outcome(segment: StrokeSegment, pitches: Sequence[PitchEvent],
                     cfg: SegmenterConfig) -> StrokeOutcome:
    """Outcome of one stroke from its end position and pitch pattern.

    Net-crossing failure is checked first: a netted ball can still bounce on
    the striker's side, so pitch counts alone would misread it. Nonstandard
    pitch patterns (the fall-through case) fold into MISSED_OUT; the caller
    is responsible for annotating them.
    """
    if cfg.net_x is None:
        raise DomainError("classify_outcome requires a resolved net_x")
    net = cfg.net_x
    ltr = segment.direction == StrokeDirection.LEFT_TO_RIGHT
    if ltr and segment.end.value <= net:
        return StrokeOutcome.MISSED_NET
    if not ltr and segment.end.value >= net:
        return StrokeOutcome.MISSED_NET
    if len(pitches) == 2:
        s0 = pitches[0].x - net
        s1 = pitches[1].x - net
        if (s0 < 0 < s1) or (s1 < 0 < s0):
            return StrokeOutcome.SERVE
    if len(pitches) == 1:
        p = pitches[0]
        if (ltr and p.x > net) or (not ltr and p.x < net):
            return StrokeOutcome.VALID
    if len(pitches) == 0:
        return StrokeOutcome.MISSED_OUT
    return StrokeOutcome.MISSED_OUT


def annotate_strokes(traj: Trajectory, cfg: SegmenterConfig | None = None
                     ) -> list[StrokeSegment]:
    """Full pipeline: segment, detect pitches, classify outcomes."""
    cfg = (cfg or SegmenterConfig()).resolve(traj)
    out = []
    for seg in segment_strokes(traj, cfg):
        pitches = detect_pitches(traj, seg, cfg)
        outcome = classify_outcome(seg, pitches, cfg)
        note = None
        kept = tuple(pitches)
        if outcome == StrokeOutcome.MISSED_OUT and pitches:
            note = f"nonstandard pitch pattern ({len(pitches)} pitches)"
            kept = ()
        out.append(replace(seg, pitches=kept, outcome=outcome, annotation=note))
    return out


def strokes_to_dict(segments: Iterable[StrokeSegment], fps: float) -> dict:
    """Stroke annotation document: the on-disk JSON schema."""
    strokes = []
    for s in segments:
        entry = {
            "start_frame": s.start.frame_index,
            "end_frame": s.end.frame_index,
            "direction": s.direction.value,
            "outcome": s.outcome.value if s.outcome is not None else None,
            "pitches": [{"frame": p.frame_index, "x": p.x, "y": p.y} for p in s.pitches],
        }
        if s.annotation is not None:
            entry["annotation"] = s.annotation
        strokes.append(entry)
    return {"fps": fps, "strokes": strokes}


def strokes_to_json(segments: Iterable[StrokeSegment], fps: float, **extra) -> str:
    doc = strokes_to_dict(segments, fps)
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
