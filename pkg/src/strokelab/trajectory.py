"""Ball trajectory data model and CSV I/O.

Coordinates live in pixel space with the origin at the frame's top-left
corner: x grows rightward, y grows downward. Undetected frames carry no
coordinates and must never feed downstream math; dropping them keeps the
original timestamps, so post-drop series are non-uniformly spaced in time.

CSV format (UTF-8): header ``frame,x,y,detected``, one row per frame,
x/y as decimals with 3 places (empty when detected=0), detected in {0,1}.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, FormatError

CSV_HEADER = "frame,x,y,detected"

DEFAULT_FPS = 120.0
DEFAULT_FRAME_SIZE = (1920, 1080)


@dataclass(frozen=True)
class BallObservation:
    """One frame's ball detection.

    Attributes:
        frame_index: Zero-based frame index in the source video.
        t: Timestamp in seconds (= frame_index / fps).
        x: Horizontal pixel coordinate, None when not detected.
        y: Vertical pixel coordinate (grows downward), None when not detected.
        detected: Whether the tracker reported the ball in this frame.
    """

    frame_index: int
    t: float
    x: float | None
    y: float | None
    detected: bool


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered ball observations with the recording geometry."""

    observations: tuple[BallObservation, ...]
    fps: float = DEFAULT_FPS
    frame_width: int = DEFAULT_FRAME_SIZE[0]
    frame_height: int = DEFAULT_FRAME_SIZE[1]

    def __post_init__(self):
        if self.fps <= 0:
            raise DomainError(f"fps must be positive, got {self.fps}")
        if self.frame_width <= 0 or self.frame_height <= 0:
            raise DomainError(
                f"frame size must be positive, got {self.frame_width}x{self.frame_height}"
            )
        prev = -1
        for obs in self.observations:
            if obs.frame_index <= prev:
                raise DomainError(
                    f"frame indices must be strictly increasing: "
                    f"{obs.frame_index} after {prev}"
                )
            prev = obs.frame_index
            if obs.detected:
                if obs.x is None or obs.y is None:
                    raise DomainError(
                        f"frame {obs.frame_index}: detected observation lacks coordinates"
                    )
                if not (0.0 <= obs.x < self.frame_width):
                    raise DomainError(
                        f"frame {obs.frame_index}: x={obs.x} outside [0, {self.frame_width})"
                    )
                if not (0.0 <= obs.y < self.frame_height):
                    raise DomainError(
                        f"frame {obs.frame_index}: y={obs.y} outside [0, {self.frame_height})"
                    )

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def all_detected(self) -> bool:
        return all(o.detected for o in self.observations)

    def detected_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(t, x, y, frame_index) arrays over detected observations only."""
        det = [o for o in self.observations if o.detected]
        t = np.array([o.t for o in det], dtype=np.float64)
        x = np.array([o.x for o in det], dtype=np.float64)
        y = np.array([o.y for o in det], dtype=np.float64)
        f = np.array([o.frame_index for o in det], dtype=np.int64)
        return t, x, y, f


def make_observation(frame_index: int, fps: float, x: float | None, y: float | None,
                     detected: bool) -> BallObservation:
    """Build an observation with the timestamp derived from frame index and fps."""
    return BallObservation(
        frame_index=int(frame_index),
        t=frame_index / fps,
        x=None if not detected else float(x),
        y=None if not detected else float(y),
        detected=bool(detected),
    )


def trajectory_from_arrays(frames: Sequence[int], x: Sequence[float], y: Sequence[float],
                           detected: Sequence[bool], fps: float = DEFAULT_FPS,
                           frame_size: tuple[int, int] = DEFAULT_FRAME_SIZE) -> Trajectory:
    obs = tuple(
        make_observation(f, fps, xi, yi, d)
        for f, xi, yi, d in zip(frames, x, y, detected)
    )
    return Trajectory(obs, fps=fps, frame_width=frame_size[0], frame_height=frame_size[1])


def drop_missing(traj: Trajectory) -> Trajectory:
    """Remove undetected observations, keeping original timestamps.

    Timestamps are not re-indexed: gaps remain in t, since downstream
    windows are defined over time spans, not sample counts.
    """
    kept = tuple(o for o in traj.observations if o.detected)
    if len(kept) < 2:
        raise DomainError(
            f"insufficient data: only {len(kept)} detected observation(s), need at least 2"
        )
    return replace(traj, observations=kept)


def _parse_row(line: str, lineno: int, fps: float, width: int, height: int,
               prev_frame: int) -> BallObservation:
    parts = line.split(",")
    if len(parts) != 4:
        raise FormatError(f"line {lineno}: expected 4 fields, got {len(parts)}")
    raw_frame, raw_x, raw_y, raw_det = parts
    try:
        frame = int(raw_frame)
    except ValueError:
        raise FormatError(f"line {lineno}: frame index {raw_frame!r} is not an integer") from None
    if frame < 0:
        raise FormatError(f"line {lineno}: frame index {frame} is negative")
    if frame <= prev_frame:
        raise FormatError(
            f"line {lineno}: frame index {frame} does not increase (previous was {prev_frame})"
        )
    if raw_det == "1":
        detected = True
    elif raw_det == "0":
        detected = False
    else:
        raise FormatError(f"line {lineno}: detected flag must be 0 or 1, got {raw_det!r}")
    if not detected:
        if raw_x or raw_y:
            raise FormatError(f"line {lineno}: undetected row must leave x and y empty")
        return make_observation(frame, fps, None, None, False)
    try:
        x = float(raw_x)
        y = float(raw_y)
    except ValueError:
        raise FormatError(
            f"line {lineno}: coordinates {raw_x!r},{raw_y!r} are not decimal numbers"
        ) from None
    if not (np.isfinite(x) and np.isfinite(y)):
        raise FormatError(f"line {lineno}: coordinates must be finite")
    if not (0.0 <= x < width):
        raise FormatError(f"line {lineno}: x={x} outside [0, {width})")
    if not (0.0 <= y < height):
        raise FormatError(f"line {lineno}: y={y} outside [0, {height})")
    return make_observation(frame, fps, x, y, True)


def load_trajectory(source, fps: float = DEFAULT_FPS,
                    frame_size: tuple[int, int] = DEFAULT_FRAME_SIZE) -> Trajectory:
    """Parse a trajectory CSV from a byte stream (or raw bytes).

    Raises FormatError naming the offending 1-based line for any malformed
    row, non-monotonic frame index, out-of-bounds coordinate, or empty file.
    """
    if isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FormatError(f"trajectory CSV is not valid UTF-8: {exc}") from None
    if "\r" in text:
        raise FormatError("trajectory CSV must use bare newline line endings")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError("empty trajectory file")
    if lines[0] != CSV_HEADER:
        raise FormatError(f"line 1: header must be {CSV_HEADER!r}, got {lines[0]!r}")
    if len(lines) == 1:
        raise FormatError("trajectory file has a header but no rows")
    width, height = frame_size
    observations = []
    prev_frame = -1
    for offset, line in enumerate(lines[1:], start=2):
        obs = _parse_row(line, offset, fps, width, height, prev_frame)
        prev_frame = obs.frame_index
        observations.append(obs)
    return Trajectory(tuple(observations), fps=fps, frame_width=width, frame_height=height)


def format_trajectory_csv(traj: Trajectory) -> str:
    """Canonical CSV text: coordinates with 3 decimal places, trailing newline."""
    out = [CSV_HEADER]
    for o in traj.observations:
        if o.detected:
            out.append(f"{o.frame_index},{o.x:.3f},{o.y:.3f},1")
        else:
            out.append(f"{o.frame_index},,,0")
    return "\n".join(out) + "\n"


def save_trajectory(traj: Trajectory, stream) -> None:
    stream.write(format_trajectory_csv(traj).encode("utf-8"))


def load_trajectory_file(path, fps: float = DEFAULT_FPS,
                         frame_size: tuple[int, int] = DEFAULT_FRAME_SIZE) -> Trajectory:
    with open(path, "rb") as fh:
        return load_trajectory(fh, fps=fps, frame_size=frame_size)


def save_trajectory_file(traj: Trajectory, path) -> None:
    data = format_trajectory_csv(traj).encode("utf-8")
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)
