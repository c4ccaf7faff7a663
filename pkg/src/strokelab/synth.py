"""Physics-based generator of labeled synthetic trajectories.

Strokes are integrated in a planar "striker frame" (distance along the
table axis, height above the table surface) with gravity, quadratic drag,
a constant vertical Magnus term (positive = extra downward curve, as
topspin produces), and restitution bounces located by linear interpolation
between frame steps. World meters map to pixels through an affine side
projection centered on the net axis, so the net plane lands exactly at
frame_width / 2.

Pixel coordinates are quantized to a 1/1024 px grid: on that grid the
x-mirroring used for direction normalization is exactly involutive in
double precision, which dense floats are not.

Rallies chain strokes with racket-contact continuity: each return launches
from the exact end position of the incoming ball, the handover frames are
occluded (undetected), and toss lead-in / recoil lead-out runs make the
first and last stroke boundaries interior windowed extrema.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DomainError, FormatError
from .pipeline import LABELS, StrokeLabel, StrokeSample, prepare_sample
from .segmenter import (ExtremumEvent, ExtremumKind, PitchEvent, StrokeDirection,
                        StrokeOutcome, StrokeSegment)
from .trajectory import BallObservation, Trajectory, make_observation

TABLE_SURFACE_HEIGHT = 0.76  # m, standard table height above the floor
NET_HEIGHT = 0.1525          # m above the table surface
BALL_RADIUS = 0.02           # m

TEMPLATE_VERSION = 1


@dataclass(frozen=True)
class PhysicsParams:
    gravity: float = 9.81          # m/s^2
    drag_coeff: float = 0.10       # 1/m, quadratic drag folded into one coefficient
    magnus_accel: float = 0.0      # m/s^2, positive = extra downward curve
    restitution: float = 0.85
    table_length: float = 2.74     # m
    table_height_in_frame: float | None = None  # px; None = derive from camera

    def __post_init__(self):
        if self.gravity < 0:
            raise DomainError("gravity must be non-negative")
        if self.drag_coeff < 0:
            raise DomainError("drag_coeff must be non-negative")
        if not (0 < self.restitution <= 1):
            raise DomainError("restitution must lie in (0, 1]")
        if self.table_length <= 0:
            raise DomainError("table_length must be positive")


@dataclass(frozen=True)
class CameraModel:
    distance_to_table: float = 1750.0  # mm, from the table edge along the net axis
    elevation: float = 1400.0          # mm above the floor
    frame_width: int = 1920
    frame_height: int = 1080
    fps: float = 120.0

    def __post_init__(self):
        if min(self.distance_to_table, self.elevation, self.frame_width,
               self.frame_height, self.fps) <= 0:
            raise DomainError("all camera model fields must be positive")


# Behind-the-end margin shown in frame on each side; large enough for serve
# positions and fast-stroke racket contacts behind the end line.
MARGIN_M = 1.3
EDGE_PX = 8.0


def quantize_px(v: float) -> float:
    return round(v * 1024.0) / 1024.0


@dataclass(frozen=True)
class Projection:
    """Affine meters-to-pixels side projection, net axis centered."""

    px_per_m: float
    x_offset: float
    horizon_row: float
    cam_height: float  # m above the table surface

    @classmethod
    def from_models(cls, cam: CameraModel, params: PhysicsParams) -> "Projection":
        ppm = (cam.frame_width - 2 * EDGE_PX) / (params.table_length + 2 * MARGIN_M)
        cam_h = cam.elevation / 1000.0 - TABLE_SURFACE_HEIGHT
        return cls(px_per_m=ppm, x_offset=EDGE_PX + ppm * MARGIN_M,
                   horizon_row=cam.frame_height / 2.0, cam_height=cam_h)

    def x_px(self, p: float) -> float:
        return quantize_px(self.x_offset + self.px_per_m * p)

    def y_px(self, h: float) -> float:
        return quantize_px(self.horizon_row + self.px_per_m * (self.cam_height - h))

    @property
    def table_row(self) -> float:
        """Pixel row of the table surface (the derived table height in frame)."""
        return self.y_px(0.0)


@dataclass(frozen=True)
class StrokeTemplate:
    """Per-label launch parameter ranges.

    Defaults encode the qualitative ordering of real strokes: pushes and
    lobs are slow, flicks and flats fast, topspin fast with a strong
    downward Magnus term, blocks moderate with little spin, lobs launched
    steeply upward.
    """

    label: StrokeLabel
    speed_range: tuple[float, float]          # m/s
    launch_angle_range: tuple[float, float]   # degrees above horizontal
    magnus_range: tuple[float, float]         # m/s^2, positive = downward
    contact_height_range: tuple[float, float]  # m above the table

    def __post_init__(self):
        for name in ("speed_range", "launch_angle_range", "magnus_range",
                     "contact_height_range"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise DomainError(f"{name} is empty: ({lo}, {hi})")


DEFAULT_TEMPLATES: dict[StrokeLabel, StrokeTemplate] = {
    StrokeLabel.TOPSPIN: StrokeTemplate(StrokeLabel.TOPSPIN, (11.0, 14.0), (-1.0, 5.0),
                                        (5.0, 8.0), (0.25, 0.45)),
    StrokeLabel.BLOCK: StrokeTemplate(StrokeLabel.BLOCK, (5.5, 7.5), (1.0, 7.0),
                                      (0.0, 1.5), (0.20, 0.35)),
    StrokeLabel.PUSH: StrokeTemplate(StrokeLabel.PUSH, (4.0, 5.2), (8.0, 16.0),
                                     (-2.0, -0.6), (0.28, 0.42)),
    StrokeLabel.FLICK: StrokeTemplate(StrokeLabel.FLICK, (8.0, 10.5), (1.0, 6.0),
                                      (1.0, 3.0), (0.15, 0.30)),
    StrokeLabel.LOB: StrokeTemplate(StrokeLabel.LOB, (4.2, 5.8), (45.0, 60.0),
                                    (0.5, 2.5), (0.20, 0.35)),
    StrokeLabel.FLAT: StrokeTemplate(StrokeLabel.FLAT, (14.0, 17.0), (-7.0, -2.0),
                                     (-0.5, 0.5), (0.30, 0.50)),
}

SERVE_TEMPLATE = StrokeTemplate(StrokeLabel.PUSH, (3.6, 4.6), (-8.0, -2.0),
                                (-1.0, 0.5), (0.30, 0.45))

RALLY_KINDS = ("serve", "valid", "missed_net", "missed_out")

_KIND_OUTCOME = {
    "serve": StrokeOutcome.SERVE,
    "valid": StrokeOutcome.VALID,
    "missed_net": StrokeOutcome.MISSED_NET,
    "missed_out": StrokeOutcome.MISSED_OUT,
}


@dataclass(frozen=True)
class Contact:
    t: float          # seconds from stroke start (exact, sub-frame)
    s: float          # striker-frame position, m
    vh_before: float
    vh_after: float


@dataclass(frozen=True)
class Flight:
    """Per-frame positions (starting at the launch sample) plus events."""

    positions: tuple[tuple[float, float], ...]  # (s, h) per frame
    contacts: tuple[Contact, ...]
    net_crossing_h: float | None
    hit_net: bool
    end_velocity: tuple[float, float]


def _simulate_flight(s0: float, h0: float, vs: float, vh: float,
                     params: PhysicsParams, fps: float, magnus: float,
                     stop_s: float, *, clip_at_net: bool = False,
                     max_steps: int = 3000) -> Flight:
    """Integrate one flight with semi-implicit Euler at 1/fps steps.

    Bounces occur when the height crosses the table plane over the table;
    the event time comes from linear interpolation inside the step and the
    vertical velocity is scaled by -restitution. Integration ends when the
    ball passes stop_s, falls below table level beyond the table end, or
    (when clip_at_net is set) reaches the net plane.
    """
    dt = 1.0 / fps
    length = params.table_length
    net_s = length / 2.0
    net_stop = net_s - BALL_RADIUS
    s, h = s0, h0
    positions = [(s, h)]
    contacts: list[Contact] = []
    net_h: float | None = None
    hit_net = False
    t = 0.0
    for _ in range(max_steps):
        speed = math.hypot(vs, vh)
        vs += (-params.drag_coeff * speed * vs) * dt
        vh += (-params.gravity - magnus - params.drag_coeff * speed * vh) * dt
        new_s = s + vs * dt
        new_h = h + vh * dt
        if clip_at_net and new_s >= net_stop and s < net_stop:
            frac = (net_stop - s) / (new_s - s)
            h_cross = h + (new_h - h) * frac
            s, h = net_stop, h_cross
            net_h = h_cross
            if h_cross < NET_HEIGHT:
                hit_net = True
                t += dt
                positions.append((s, h))
                break
        if net_h is None and s < net_s <= new_s:
            frac = (net_s - s) / (new_s - s)
            net_h = h + (new_h - h) * frac
        if h >= 0.0 > new_h:
            frac = h / (h - new_h)
            s_c = s + (new_s - s) * frac
            if 0.0 <= s_c <= length:
                vh_before = vh
                vh = -params.restitution * vh
                contacts.append(Contact(t=t + frac * dt, s=s_c,
                                        vh_before=vh_before, vh_after=vh))
                rem = (1.0 - frac) * dt
                s = s_c + vs * rem
                h = 0.0 + vh * rem
            else:
                s, h = new_s, new_h
        else:
            s, h = new_s, new_h
        t += dt
        positions.append((s, h))
        if s >= stop_s:
            break
        if h < -0.30 and s > length:
            break
    return Flight(positions=tuple(positions), contacts=tuple(contacts),
                  net_crossing_h=net_h, hit_net=hit_net, end_velocity=(vs, vh))


def _draw_launch(template: StrokeTemplate, rng: np.random.Generator,
                 angle_widen: float = 0.0) -> tuple[float, float, float, float]:
    speed = rng.uniform(*template.speed_range)
    lo, hi = template.launch_angle_range
    angle = math.radians(rng.uniform(lo, hi + angle_widen))
    magnus = rng.uniform(*template.magnus_range)
    h0 = rng.uniform(*template.contact_height_range)
    return speed, angle, magnus, h0


def _launch_position(speed: float, rng: np.random.Generator) -> float:
    """Striker-frame contact point: slow strokes reach over the table,
    fast ones are hit from behind the end line."""
    if speed < 6.0:
        return rng.uniform(0.15, 0.60)
    if speed < 10.0:
        return rng.uniform(-0.35, 0.20)
    return rng.uniform(-0.90, -0.20)


# Guard times keeping bounces clear of the stroke boundaries (pitch margin
# is 50 ms; leave 3 extra frames at 120 fps).
_MARGIN_GUARD = 0.075
_NET_CLEARANCE = 0.02


def _accepts(kind: str, flight: Flight, params: PhysicsParams, fps: float,
             final: bool) -> bool:
    length = params.table_length
    net_s = length / 2.0
    end_t = (len(flight.positions) - 1) / fps
    heights = [h for _, h in flight.positions]
    if max(heights) > 2.0:
        return False
    if kind == "missed_net":
        return flight.hit_net and not flight.contacts and (
            flight.net_crossing_h is not None and flight.net_crossing_h > 0.01)
    if flight.hit_net:
        return False
    if flight.net_crossing_h is None or flight.net_crossing_h < NET_HEIGHT + _NET_CLEARANCE:
        return False
    end_s, end_h = flight.positions[-1]
    if end_s < length:
        return False
    if not final and not (0.08 <= end_h <= 1.30):
        return False
    if kind == "valid":
        if len(flight.contacts) != 1:
            return False
        c = flight.contacts[0]
        return (net_s + 0.12 <= c.s <= length - 0.12
                and c.t >= _MARGIN_GUARD and end_t - c.t >= _MARGIN_GUARD)
    if kind == "serve":
        if len(flight.contacts) != 2:
            return False
        c1, c2 = flight.contacts
        return (0.08 <= c1.s <= net_s - 0.25 and net_s + 0.20 <= c2.s <= length - 0.12
                and c1.t >= _MARGIN_GUARD and c2.t - c1.t >= _MARGIN_GUARD
                and end_t - c2.t >= _MARGIN_GUARD)
    if kind == "missed_out":
        return len(flight.contacts) == 0 and end_t >= 10.0 / fps
    raise DomainError(f"unknown stroke kind {kind!r}")


_MISS_NET_SPEED = (5.5, 9.5)
_MISS_NET_ANGLE = (-1.0, 5.0)
_MISS_OUT_SPEED = (13.0, 17.0)
_MISS_OUT_ANGLE = (-4.0, 3.0)


def _sample_flight(kind: str, template: StrokeTemplate, params: PhysicsParams,
                   fps: float, rng: np.random.Generator, *,
                   s0: float | None = None, h0: float | None = None,
                   final: bool = True, max_tries: int = 600
                   ) -> tuple[Flight, float, float]:
    """Rejection-sample launch parameters until the flight matches the kind.

    Returns (flight, s0, speed). Later retries widen the upward angle bound
    so low incoming contacts stay reachable.
    """
    for attempt in range(max_tries):
        widen = 0.0 if attempt < 150 else (6.0 if attempt < 300 else 12.0)
        speed, angle, magnus, h_draw = _draw_launch(template, rng, widen)
        if kind == "missed_net":
            speed = rng.uniform(*_MISS_NET_SPEED)
            angle = math.radians(rng.uniform(_MISS_NET_ANGLE[0],
                                             _MISS_NET_ANGLE[1] + widen))
            magnus = rng.uniform(0.0, 2.0)
        elif kind == "missed_out":
            speed = rng.uniform(*_MISS_OUT_SPEED)
            angle = math.radians(rng.uniform(_MISS_OUT_ANGLE[0],
                                             _MISS_OUT_ANGLE[1] + widen))
            magnus = rng.uniform(-1.0, 1.0)
        launch_s = _launch_position(speed, rng) if s0 is None else s0
        launch_h = h_draw if h0 is None else h0
        if kind == "serve":
            launch_s = rng.uniform(-0.35, -0.10) if s0 is None else s0
        overshoot = min(1.10, max(0.15, speed * rng.uniform(0.045, 0.085)))
        vs = speed * math.cos(angle)
        vh = speed * math.sin(angle)
        flight = _simulate_flight(launch_s, launch_h, vs, vh, params, fps, magnus,
                                  stop_s=params.table_length + overshoot,
                                  clip_at_net=(kind == "missed_net"))
        if _accepts(kind, flight, params, fps, final):
            return flight, launch_s, speed
    raise DomainError(
        f"could not generate a {kind!r} stroke for template {template.label.value} "
        f"after {max_tries} attempts"
    )


def _rebound_positions(flight: Flight, params: PhysicsParams, fps: float,
                       rng: np.random.Generator, frames: int) -> list[tuple[float, float]]:
    """Recoil after the last recorded position: reversed, decaying horizontal
    motion with the ball dropping toward the floor (height clamped in-frame)."""
    dt = 1.0 / fps
    s, h = flight.positions[-1]
    vs, vh = flight.end_velocity
    vs = -0.25 * abs(vs) if vs >= 0 else -0.25 * vs
    vs = -abs(vs)
    vh = min(vh, 0.0) - 0.4
    out = []
    for _ in range(frames):
        vs *= 0.92
        vh -= params.gravity * dt
        s += vs * dt
        h = max(h + vh * dt, -0.45)
        out.append((s, h))
    return out


def _toss_positions(s0: float, h0: float, frames: int) -> list[tuple[float, float]]:
    """Serve toss: drift backward into the contact point while rising/falling."""
    out = []
    for i in range(frames):
        frac = (frames - i) / frames
        s = s0 + 0.10 * frac
        h = h0 + 0.28 * math.sin(math.pi * (i + 1) / (frames + 1))
        out.append((s, h))
    return out


def _to_pixels(positions, direction: StrokeDirection, proj: Projection,
               table_length: float) -> list[tuple[float, float]]:
    pix = []
    for s, h in positions:
        p = s if direction == StrokeDirection.LEFT_TO_RIGHT else table_length - s
        pix.append((proj.x_px(p), proj.y_px(h)))
    return pix


@dataclass(frozen=True)
class StrokeGroundTruth:
    label: StrokeLabel
    direction: StrokeDirection
    outcome: StrokeOutcome
    first_frame: int
    last_frame: int
    boundary_frame: int  # frame of the extremal-x observation ending the stroke
    contact_frames: tuple[int, ...]
    contact_pixels: tuple[tuple[float, float], ...]
    bounce_velocities: tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class RallyAnnotation:
    fps: float
    strokes: tuple[StrokeGroundTruth, ...]
    boundary_frames: tuple[int, ...]  # stroke boundaries, one more than strokes


def _ground_truth(label, direction, outcome, first_frame, flight, fps, proj,
                  table_length, boundary_frame=None) -> StrokeGroundTruth:
    last_frame = first_frame + len(flight.positions) - 1
    if boundary_frame is None:
        boundary_frame = last_frame
    frames, pixels, velocities = [], [], []
    for c in flight.contacts:
        frames.append(first_frame + round(c.t * fps))
        p = c.s if direction == StrokeDirection.LEFT_TO_RIGHT else table_length - c.s
        pixels.append((proj.x_px(p), proj.table_row))
        velocities.append((c.vh_before, c.vh_after))
    return StrokeGroundTruth(label=label, direction=direction, outcome=outcome,
                             first_frame=first_frame, last_frame=last_frame,
                             boundary_frame=boundary_frame,
                             contact_frames=tuple(frames),
                             contact_pixels=tuple(pixels),
                             bounce_velocities=tuple(velocities))


def simulate_stroke(template: StrokeTemplate, params: PhysicsParams,
                    cam: CameraModel, direction: StrokeDirection,
                    rng_seed: int) -> tuple[Trajectory, StrokeGroundTruth]:
    """One stroke from a single template draw (no outcome guarantee).

    Ground truth records the exact bounce frames and pre/post bounce
    vertical velocities.
    """
    rng = np.random.default_rng(rng_seed)
    speed, angle, magnus, h0 = _draw_launch(template, rng)
    s0 = _launch_position(speed, rng)
    overshoot = min(1.10, max(0.15, speed * rng.uniform(0.045, 0.085)))
    flight = _simulate_flight(s0, h0, speed * math.cos(angle), speed * math.sin(angle),
                              params, cam.fps, magnus,
                              stop_s=params.table_length + overshoot)
    if len(flight.positions) < 5:
        raise DomainError(
            f"template {template.label.value} produced a {len(flight.positions)}-frame "
            f"trajectory, need at least 5"
        )
    pixels = _to_pixels(flight.positions, direction, Projection.from_models(cam, params),
                        params.table_length)
    obs = tuple(make_observation(i, cam.fps, x, y, True) for i, (x, y) in enumerate(pixels))
    traj = Trajectory(obs, fps=cam.fps, frame_width=cam.frame_width,
                      frame_height=cam.frame_height)
    gt = _ground_truth(template.label, direction, StrokeOutcome.VALID
                       if len(flight.contacts) == 1 else StrokeOutcome.MISSED_OUT,
                       0, flight, cam.fps, Projection.from_models(cam, params),
                       params.table_length)
    return traj, gt


def generate_valid_stroke(template: StrokeTemplate, params: PhysicsParams,
                          cam: CameraModel, direction: StrokeDirection,
                          rng: np.random.Generator
                          ) -> tuple[Trajectory, StrokeGroundTruth]:
    """Rejection-sampled stroke guaranteed to be a valid crossing with one bounce."""
    flight, s0, _ = _sample_flight("valid", template, params, cam.fps, rng)
    proj = Projection.from_models(cam, params)
    pixels = _to_pixels(flight.positions, direction, proj, params.table_length)
    obs = tuple(make_observation(i, cam.fps, x, y, True) for i, (x, y) in enumerate(pixels))
    traj = Trajectory(obs, fps=cam.fps, frame_width=cam.frame_width,
                      frame_height=cam.frame_height)
    gt = _ground_truth(template.label, direction, StrokeOutcome.VALID, 0, flight,
                       cam.fps, proj, params.table_length)
    return traj, gt


def segment_from_ground_truth(traj: Trajectory, gt: StrokeGroundTruth) -> StrokeSegment:
    """Build the StrokeSegment a perfect segmenter would produce."""
    first = traj.observations[0]
    last = traj.observations[-1]
    ltr = gt.direction == StrokeDirection.LEFT_TO_RIGHT
    start = ExtremumEvent(t=first.t, frame_index=first.frame_index, value=first.x,
                          kind=ExtremumKind.MINIMUM if ltr else ExtremumKind.MAXIMUM)
    end = ExtremumEvent(t=last.t, frame_index=last.frame_index, value=last.x,
                        kind=ExtremumKind.MAXIMUM if ltr else ExtremumKind.MINIMUM)
    pitches = tuple(
        PitchEvent(t=f / traj.fps, frame_index=f, x=px, y=py)
        for f, (px, py) in zip(gt.contact_frames, gt.contact_pixels)
    )
    return StrokeSegment(start=start, end=end, direction=gt.direction,
                         pitches=pitches, outcome=gt.outcome)


def labeled_stroke_samples(n_per_label: int, pad_mode: str, seed: int,
                           params: PhysicsParams | None = None,
                           cam: CameraModel | None = None,
                           templates: dict[StrokeLabel, StrokeTemplate] | None = None
                           ) -> list[StrokeSample]:
    """Deterministic labeled dataset of valid strokes, n per label."""
    params = params or PhysicsParams()
    cam = cam or CameraModel()
    templates = templates or DEFAULT_TEMPLATES
    rng = np.random.default_rng(seed)
    samples = []
    for label in LABELS:
        template = templates[label]
        for i in range(n_per_label):
            direction = (StrokeDirection.LEFT_TO_RIGHT if rng.random() < 0.5
                         else StrokeDirection.RIGHT_TO_LEFT)
            traj, gt = generate_valid_stroke(template, params, cam, direction, rng)
            segment = segment_from_ground_truth(traj, gt)
            samples.append(prepare_sample(traj, segment, pad_mode, label=label,
                                          source_id=f"{label.value}-{seed}-{i}"))
    return samples


def parse_rally_spec(spec: str) -> list[str]:
    """Parse a rally plan like "serve,valid*5,missed_out" into stroke kinds."""
    kinds: list[str] = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            raise FormatError(f"empty entry in rally spec {spec!r}")
        if "*" in part:
            name, _, count = part.partition("*")
            try:
                repeat = int(count)
            except ValueError:
                raise FormatError(f"bad repeat count in rally entry {part!r}") from None
            if repeat < 1:
                raise FormatError(f"repeat count must be positive in {part!r}")
        else:
            name, repeat = part, 1
        name = name.strip()
        if name not in RALLY_KINDS:
            raise FormatError(f"unknown stroke kind {name!r} (expected one of {RALLY_KINDS})")
        kinds.extend([name] * repeat)
    if not kinds:
        raise FormatError("rally spec contains no strokes")
    return kinds


def _eligible_labels(s0: float, h0: float) -> list[StrokeLabel]:
    labels = list(LABELS)
    if s0 < -0.40:  # far behind the end: slow strokes cannot reach
        labels = [lb for lb in labels if lb not in (StrokeLabel.PUSH, StrokeLabel.LOB)]
    if s0 < -0.55:  # even a block cannot carry this far
        labels = [lb for lb in labels if lb != StrokeLabel.BLOCK]
    if h0 < 0.22:  # low contact: downward-angled flats cannot clear the net
        labels = [lb for lb in labels if lb != StrokeLabel.FLAT]
    return labels


def simulate_rally(stroke_plan: Sequence[tuple[StrokeTemplate | None, str]],
                   params: PhysicsParams | None = None,
                   cam: CameraModel | None = None,
                   rng_seed: int = 0) -> tuple[Trajectory, RallyAnnotation]:
    """Simulate a full rally: a serve followed by alternating returns.

    Plan entries are (template, kind); a None template lets the generator
    pick a label eligible for the incoming ball state. Missed strokes can
    only terminate the rally. Gap frames around each racket contact are
    emitted as undetected rows.
    """
    params = params or PhysicsParams()
    cam = cam or CameraModel()
    rng = np.random.default_rng(rng_seed)
    plan = list(stroke_plan)
    if not plan or plan[0][1] != "serve":
        raise DomainError("rally must start with a serve")
    for template, kind in plan[1:]:
        if kind == "serve":
            raise DomainError("only the first stroke of a rally may be a serve")
    for i, (_, kind) in enumerate(plan):
        if kind in ("missed_net", "missed_out") and i != len(plan) - 1:
            raise DomainError(f"{kind} ends the rally and must be the final stroke")

    proj = Projection.from_models(cam, params)
    length = params.table_length
    fps = cam.fps
    direction = (StrokeDirection.LEFT_TO_RIGHT if rng.random() < 0.5
                 else StrokeDirection.RIGHT_TO_LEFT)

    detected: list[tuple[int, float, float]] = []  # (frame, px, py)
    strokes: list[StrokeGroundTruth] = []
    boundaries: list[int] = []

    lead_in = int(rng.integers(12, 19))
    frame = 0

    serve_template, _ = plan[0]
    serve_template = serve_template or SERVE_TEMPLATE
    serve_flight, serve_s0, _ = _sample_flight("serve", serve_template, params, fps, rng,
                                               final=(len(plan) == 1))
    toss = _toss_positions(serve_s0, serve_flight.positions[0][1], lead_in)
    for s, h in _to_pixels(toss, direction, proj, length):
        detected.append((frame, s, h))
        frame += 1

    incoming_flight = serve_flight
    first_frame = frame
    boundaries.append(first_frame)
    for sx, sy in _to_pixels(serve_flight.positions, direction, proj, length):
        detected.append((frame, sx, sy))
        frame += 1
    strokes.append(_ground_truth(serve_template.label, direction, StrokeOutcome.SERVE,
                                 first_frame, serve_flight, fps, proj, length))
    boundaries.append(strokes[-1].boundary_frame)

    for idx, (template, kind) in enumerate(plan[1:], start=1):
        direction = (StrokeDirection.RIGHT_TO_LEFT
                     if direction == StrokeDirection.LEFT_TO_RIGHT
                     else StrokeDirection.LEFT_TO_RIGHT)
        end_s, end_h = incoming_flight.positions[-1]
        # Handover: the return launches from the incoming ball's exact
        # position; length - end_s converts between the two striker frames.
        s0 = length - end_s
        h0 = end_h
        if template is None:
            eligible = _eligible_labels(s0, h0)
            label = eligible[int(rng.integers(0, len(eligible)))]
            template = DEFAULT_TEMPLATES[label]
        final = idx == len(plan) - 1
        flight, _, _ = _sample_flight(kind, template, params, fps, rng,
                                      s0=s0, h0=h0, final=final)
        gap = int(rng.integers(2, 7))
        frame += gap
        first_frame = frame
        pixels = _to_pixels(flight.positions, direction, proj, length)
        for px, py in pixels:
            detected.append((frame, px, py))
            frame += 1
        boundary = None
        if kind == "missed_net" and flight.hit_net:
            # rebound frames follow the net contact inside the flight; the
            # stroke boundary is the net-contact frame itself
            boundary = first_frame + len(flight.positions) - 1
            rebound = _rebound_positions(flight, params, fps, rng,
                                         int(rng.integers(12, 17)))
            for px, py in _to_pixels(rebound, direction, proj, length):
                detected.append((frame, px, py))
                frame += 1
        gt = _ground_truth(template.label, direction, _KIND_OUTCOME[kind],
                           first_frame, flight, fps, proj, length,
                           boundary_frame=boundary)
        strokes.append(gt)
        boundaries.append(gt.boundary_frame)
        incoming_flight = flight

    last_kind = plan[-1][1]
    if last_kind != "missed_net":
        rebound = _rebound_positions(incoming_flight, params, fps, rng,
                                     int(rng.integers(12, 17)))
        for px, py in _to_pixels(rebound, direction, proj, length):
            detected.append((frame, px, py))
            frame += 1

    by_frame = {f: (x, y) for f, x, y in detected}
    observations = []
    for f in range(frame):
        if f in by_frame:
            x, y = by_frame[f]
            observations.append(make_observation(f, fps, x, y, True))
        else:
            observations.append(make_observation(f, fps, None, None, False))
    traj = Trajectory(tuple(observations), fps=fps, frame_width=cam.frame_width,
                      frame_height=cam.frame_height)
    annotation = RallyAnnotation(fps=fps, strokes=tuple(strokes),
                                 boundary_frames=tuple(boundaries))
    return traj, annotation


def build_rally(kinds: Sequence[str], params: PhysicsParams | None = None,
                cam: CameraModel | None = None, rng_seed: int = 0
                ) -> tuple[Trajectory, RallyAnnotation]:
    """Rally from stroke kinds alone; labels are chosen by the generator."""
    plan = [(SERVE_TEMPLATE if kind == "serve" else None, kind) for kind in kinds]
    return simulate_rally(plan, params, cam, rng_seed)


def degrade(traj: Trajectory, dropout_prob: float, jitter_sigma: float,
            rng_seed: int) -> Trajectory:
    """Emulate tracker misses and localization noise.

    Each observation is independently marked undetected with the given
    probability; surviving coordinates get Gaussian noise, clamped to the
    frame and re-quantized to the pixel grid.
    """
    if not (0.0 <= dropout_prob < 1.0):
        raise DomainError(f"dropout_prob must lie in [0, 1), got {dropout_prob}")
    if jitter_sigma < 0:
        raise DomainError(f"jitter_sigma must be non-negative, got {jitter_sigma}")
    rng = np.random.default_rng(rng_seed)
    n = len(traj.observations)
    drops = rng.random(n)
    noise = rng.normal(0.0, 1.0, (n, 2)) * jitter_sigma
    max_x = (traj.frame_width * 1024 - 1) / 1024.0
    max_y = (traj.frame_height * 1024 - 1) / 1024.0
    observations = []
    for i, obs in enumerate(traj.observations):
        if not obs.detected or drops[i] < dropout_prob:
            observations.append(make_observation(obs.frame_index, traj.fps, None, None, False))
            continue
        x = quantize_px(min(max(obs.x + noise[i, 0], 0.0), max_x))
        y = quantize_px(min(max(obs.y + noise[i, 1], 0.0), max_y))
        observations.append(make_observation(obs.frame_index, traj.fps, x, y, True))
    return replace(traj, observations=tuple(observations))


def annotation_to_dict(ann: RallyAnnotation) -> dict:
    """Ground-truth JSON: stroke annotation schema plus contact_frames/label."""
    strokes = []
    for i, s in enumerate(ann.strokes):
        strokes.append({
            "start_frame": ann.boundary_frames[i],
            "end_frame": ann.boundary_frames[i + 1],
            "direction": s.direction.value,
            "outcome": s.outcome.value,
            "label": s.label.value,
            "contact_frames": list(s.contact_frames),
            "pitches": [
                {"frame": f, "x": px, "y": py}
                for f, (px, py) in zip(s.contact_frames, s.contact_pixels)
            ],
            "first_observed_frame": s.first_frame,
            "last_observed_frame": s.last_frame,
        })
    return {"fps": ann.fps, "strokes": strokes,
            "boundary_frames": list(ann.boundary_frames)}


def annotation_from_dict(doc: dict) -> dict:
    """Light validation for consumers that only need labels and spans."""
    try:
        strokes = doc["strokes"]
        for s in strokes:
            s["start_frame"], s["end_frame"], s["outcome"]
        return doc
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed rally annotation: {exc}") from None
