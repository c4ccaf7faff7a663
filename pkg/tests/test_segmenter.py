import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import brute_force_extrema
from strokelab.errors import DomainError
from strokelab.segmenter import (ExtremumEvent, ExtremumKind, PitchEvent,
                                 SegmenterConfig, StrokeDirection, StrokeOutcome,
                                 StrokeSegment, annotate_strokes, classify_outcome,
                                 detect_pitches, find_windowed_extrema,
                                 segment_strokes)
from strokelab.trajectory import trajectory_from_arrays

FPS = 120.0
FIVE_FRAMES = 0.04167
TEN_FRAMES = 0.08333


def series(values, fps=FPS):
    return [(i / fps, float(v)) for i, v in enumerate(values)]


def events_as_tuples(events):
    return [(e.t, e.frame_index, e.value, e.kind.value) for e in events]


def assert_matches_oracle(values, window, kind="both", fps=FPS):
    s = series(values, fps)
    got = events_as_tuples(find_windowed_extrema(s, window, kind))
    expected = [(t, i, v, k) for t, i, v, k in brute_force_extrema(s, window, kind)]
    assert got == expected


def test_triangle_wave_single_maximum():
    values = [0, 1, 2, 3, 4, 3, 2, 1, 0]
    events = find_windowed_extrema(series(values), FIVE_FRAMES, "maximum")
    assert len(events) == 1
    assert events[0].frame_index == 4
    assert events[0].value == 4.0
    assert events[0].kind == ExtremumKind.MAXIMUM
    assert_matches_oracle(values, FIVE_FRAMES, "maximum")


def test_constant_series_yields_nothing():
    for n in (5, 20, 100):
        assert find_windowed_extrema(series([7.0] * n), TEN_FRAMES, "both") == []


def test_negation_swaps_kinds():
    rng = np.random.default_rng(3)
    values = rng.integers(0, 50, size=120).astype(float)
    pos = find_windowed_extrema(series(values), TEN_FRAMES, "both")
    neg = find_windowed_extrema(series(-values), TEN_FRAMES, "both")
    assert len(pos) == len(neg)
    flip = {ExtremumKind.MINIMUM: ExtremumKind.MAXIMUM,
            ExtremumKind.MAXIMUM: ExtremumKind.MINIMUM}
    for a, b in zip(pos, neg):
        assert a.t == b.t
        assert b.value == -a.value
        assert b.kind == flip[a.kind]


def test_plateau_resolves_to_earliest_sample():
    values = [0, 1, 2, 5, 5, 5, 2, 1, 0]
    events = find_windowed_extrema(series(values), FIVE_FRAMES, "maximum")
    assert len(events) == 1
    assert events[0].frame_index == 3
    assert_matches_oracle(values, FIVE_FRAMES, "maximum")


def test_same_kind_events_merge_to_more_extreme():
    values = [0, 0, 0, 0, 0, 3, 0, 2, 0, 0, 0, 0, 0]
    events = find_windowed_extrema(series(values), FIVE_FRAMES, "maximum")
    assert [e.value for e in events] == [3.0]
    assert_matches_oracle(values, FIVE_FRAMES, "maximum")


def test_errors_on_bad_input():
    with pytest.raises(DomainError):
        find_windowed_extrema([(0.0, 1.0)], 0.1, "both")
    with pytest.raises(DomainError):
        find_windowed_extrema([(0.1, 1.0), (0.0, 2.0)], 0.1, "both")
    with pytest.raises(DomainError):
        find_windowed_extrema(series([1, 2, 3]), -1.0, "both")
    with pytest.raises(DomainError):
        find_windowed_extrema(series([1, 2, 3]), 0.1, "sideways")


@given(st.integers(min_value=0, max_value=2 ** 32 - 1))
@settings(max_examples=40, deadline=None)
def test_oracle_equivalence_random_series(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 200))
    fps = float(rng.choice([60.0, 120.0]))
    if rng.random() < 0.5:
        values = rng.integers(0, 30, size=n).astype(float)
    else:
        values = np.cumsum(rng.normal(0, 3, size=n))
    window = float(rng.choice([3, 5, 10, 15])) / fps * 0.9999
    kind = str(rng.choice(["minimum", "maximum", "both"]))
    assert_matches_oracle(values, window, kind, fps)


def zigzag_trajectory():
    """x dips to 100, rises to 1800, falls to 90, rises again; y flat-ish."""
    xs = (list(np.linspace(150, 100, 12)) + list(np.linspace(105, 1800, 35))[1:]
          + list(np.linspace(1795, 90, 35)) + list(np.linspace(95, 150, 12)))
    ys = [500.0 + (i % 7) for i in range(len(xs))]
    return trajectory_from_arrays(list(range(len(xs))), xs, ys,
                                  [True] * len(xs))


def test_segment_strokes_three_extrema_two_segments():
    traj = zigzag_trajectory()
    segments = segment_strokes(traj)
    assert len(segments) == 2
    first, second = segments
    assert first.direction == StrokeDirection.LEFT_TO_RIGHT
    assert second.direction == StrokeDirection.RIGHT_TO_LEFT
    assert first.end == second.start
    assert first.start.value == 100.0
    assert first.end.value == 1800.0
    assert second.end.value == 90.0


def test_segment_strokes_requires_dropped_trajectory():
    traj = trajectory_from_arrays([0, 1, 2], [1, 2, 3], [1, 2, 3],
                                  [True, False, True])
    with pytest.raises(DomainError, match="drop_missing"):
        segment_strokes(traj)


def test_segment_strokes_no_extrema_is_empty():
    traj = trajectory_from_arrays(list(range(30)),
                                  list(np.linspace(100, 1800, 30)),
                                  [500.0] * 30, [True] * 30)
    assert segment_strokes(traj) == []


def test_segment_mirror_flips_directions():
    traj = zigzag_trajectory()
    width = traj.frame_width
    mirrored = trajectory_from_arrays(
        [o.frame_index for o in traj.observations],
        [(width - 1) - o.x for o in traj.observations],
        [o.y for o in traj.observations],
        [True] * len(traj),
    )
    base = segment_strokes(traj)
    flipped = segment_strokes(mirrored)
    assert len(base) == len(flipped)
    for a, b in zip(base, flipped):
        assert a.start.t == b.start.t
        assert a.end.t == b.end.t
        assert a.direction != b.direction


def test_micro_oscillation_debounced():
    # a 40 px dip splits the turnaround into max/min/max; debouncing must
    # still produce one left-to-right / right-to-left stroke pair
    xs = (list(np.linspace(150, 100, 12)) + list(np.linspace(105, 1800, 40))[1:]
          + list(np.linspace(1793, 1760, 6)) + list(np.linspace(1765, 1790, 6))
          + list(np.linspace(1785, 100, 40)) + list(np.linspace(105, 150, 12)))
    ys = [400.0 + (i % 5) for i in range(len(xs))]
    traj = trajectory_from_arrays(list(range(len(xs))), xs, ys, [True] * len(xs))
    # the dip really does produce extra extrema before debouncing
    t = [o.t for o in traj.observations]
    raw = find_windowed_extrema(list(zip(t, xs)), TEN_FRAMES, "both")
    assert len(raw) > 3
    segments = segment_strokes(traj)
    directions = [s.direction for s in segments]
    assert directions == [StrokeDirection.LEFT_TO_RIGHT, StrokeDirection.RIGHT_TO_LEFT]
    for a, b in zip(segments, segments[1:]):
        assert a.end == b.start


def event(t, frame, value, kind):
    return ExtremumEvent(t=t, frame_index=frame, value=value, kind=kind)


def make_segment(direction, end_value, start_value=None, t0=0.0, t1=1.0):
    if direction == StrokeDirection.LEFT_TO_RIGHT:
        start = event(t0, int(t0 * FPS), start_value if start_value is not None else 100.0,
                      ExtremumKind.MINIMUM)
        end = event(t1, int(t1 * FPS), end_value, ExtremumKind.MAXIMUM)
    else:
        start = event(t0, int(t0 * FPS), start_value if start_value is not None else 1800.0,
                      ExtremumKind.MAXIMUM)
        end = event(t1, int(t1 * FPS), end_value, ExtremumKind.MINIMUM)
    return StrokeSegment(start=start, end=end, direction=direction)


def pitch(t, x):
    return PitchEvent(t=t, frame_index=int(t * FPS), x=x, y=760.0)


CFG = SegmenterConfig(net_x=960.0)


def test_outcome_valid_one_pitch_receiving_side():
    seg = make_segment(StrokeDirection.LEFT_TO_RIGHT, 1800.0)
    assert classify_outcome(seg, [pitch(0.5, 1400.0)], CFG) == StrokeOutcome.VALID


def test_outcome_serve_two_pitches_straddling():
    seg = make_segment(StrokeDirection.LEFT_TO_RIGHT, 1800.0)
    pitches = [pitch(0.3, 600.0), pitch(0.7, 1400.0)]
    assert classify_outcome(seg, pitches, CFG) == StrokeOutcome.SERVE


def test_outcome_missed_net_checked_first():
    seg = make_segment(StrokeDirection.LEFT_TO_RIGHT, 870.0)
    assert classify_outcome(seg, [], CFG) == StrokeOutcome.MISSED_NET
    # even with a pitch on the striker's side, a netted ball stays missed_net
    assert classify_outcome(seg, [pitch(0.5, 400.0)], CFG) == StrokeOutcome.MISSED_NET


def test_outcome_missed_net_right_to_left():
    seg = make_segment(StrokeDirection.RIGHT_TO_LEFT, 1100.0)
    assert classify_outcome(seg, [], CFG) == StrokeOutcome.MISSED_NET


def test_outcome_missed_out_zero_pitches():
    seg = make_segment(StrokeDirection.LEFT_TO_RIGHT, 1800.0)
    assert classify_outcome(seg, [], CFG) == StrokeOutcome.MISSED_OUT


def test_outcome_nonstandard_patterns_fold_into_missed_out():
    seg = make_segment(StrokeDirection.LEFT_TO_RIGHT, 1800.0)
    same_side = [pitch(0.3, 1200.0), pitch(0.7, 1400.0)]
    assert classify_outcome(seg, same_side, CFG) == StrokeOutcome.MISSED_OUT
    wrong_side = [pitch(0.5, 400.0)]
    assert classify_outcome(seg, wrong_side, CFG) == StrokeOutcome.MISSED_OUT
    three = [pitch(0.2, 600.0), pitch(0.5, 1200.0), pitch(0.8, 1500.0)]
    assert classify_outcome(seg, three, CFG) == StrokeOutcome.MISSED_OUT


def bounce_trajectory():
    """One left-to-right stroke with a sharp y-maximum (bounce) inside."""
    n = 60
    xs = list(np.linspace(150, 100, 8)) + list(np.linspace(110, 1800, n))
    bounce_at = 8 + 35
    ys = []
    for i in range(len(xs)):
        d = i - bounce_at
        if i < bounce_at:
            ys.append(760.0 - 9.0 * abs(d))
        else:
            ys.append(760.0 - 8.0 * d)
    ys = [max(y, 100.0) for y in ys]
    xs += list(np.linspace(1795, 1700, 8))
    ys += [ys[-1] + 2 * (i + 1) for i in range(8)]
    return trajectory_from_arrays(list(range(len(xs))), xs,
                                  [min(max(y, 0), 1079) for y in ys],
                                  [True] * len(xs))


def test_detect_pitches_finds_bounce():
    traj = bounce_trajectory()
    segments = segment_strokes(traj)
    assert len(segments) >= 1
    seg = segments[0]
    pitches = detect_pitches(traj, seg, SegmenterConfig())
    assert len(pitches) == 1
    assert abs(pitches[0].frame_index - 43) <= 1


def test_detect_pitches_monotone_y_is_empty():
    xs = list(np.linspace(150, 100, 8)) + list(np.linspace(110, 1800, 50)) \
        + list(np.linspace(1795, 1700, 8))
    ys = list(np.linspace(300, 500, len(xs)))
    traj = trajectory_from_arrays(list(range(len(xs))), xs, ys, [True] * len(xs))
    segments = segment_strokes(traj)
    assert segments
    assert detect_pitches(traj, segments[0], SegmenterConfig()) == []


def test_detect_pitches_excludes_boundary_artifact():
    # a y spike right after the stroke start is racket occlusion, not a pitch
    xs = list(np.linspace(150, 100, 8)) + list(np.linspace(110, 1800, 50)) \
        + list(np.linspace(1795, 1700, 8))
    ys = list(np.linspace(300, 400, len(xs)))
    ys[9] = 450.0  # one frame after the stroke-start extremum
    traj = trajectory_from_arrays(list(range(len(xs))), xs, ys, [True] * len(xs))
    segments = segment_strokes(traj)
    assert segments
    pitches = detect_pitches(traj, segments[0], SegmenterConfig())
    assert all(p.frame_index != 9 for p in pitches)
    assert pitches == []


def test_annotate_strokes_enforces_pitch_count_invariant():
    traj = bounce_trajectory()
    segments = annotate_strokes(traj)
    for seg in segments:
        if seg.outcome == StrokeOutcome.SERVE:
            assert len(seg.pitches) == 2
        elif seg.outcome == StrokeOutcome.VALID:
            assert len(seg.pitches) == 1
        elif seg.outcome == StrokeOutcome.MISSED_OUT:
            assert len(seg.pitches) == 0


def test_segment_invariant_validation():
    start = event(0.0, 0, 100.0, ExtremumKind.MINIMUM)
    end = event(1.0, 120, 1800.0, ExtremumKind.MAXIMUM)
    with pytest.raises(DomainError):
        StrokeSegment(start=end, end=start, direction=StrokeDirection.LEFT_TO_RIGHT)
    with pytest.raises(DomainError):
        StrokeSegment(start=start, end=end, direction=StrokeDirection.RIGHT_TO_LEFT)
    with pytest.raises(DomainError):
        StrokeSegment(start=start, end=end, direction=StrokeDirection.LEFT_TO_RIGHT,
                      outcome=StrokeOutcome.VALID, pitches=())


def test_segmenter_config_validation():
    with pytest.raises(DomainError):
        SegmenterConfig(boundary_window=0.0)
    with pytest.raises(DomainError):
        SegmenterConfig(net_x=-5.0)
    cfg = SegmenterConfig()
    traj = zigzag_trajectory()
    assert cfg.resolve(traj).net_x == traj.frame_width / 2.0
