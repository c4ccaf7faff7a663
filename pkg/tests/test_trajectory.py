import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from strokelab.errors import DomainError, FormatError
from strokelab.trajectory import (Trajectory, drop_missing, format_trajectory_csv,
                                  load_trajectory, make_observation,
                                  trajectory_from_arrays)

CSV_3ROWS = b"frame,x,y,detected\n0,100.000,200.000,1\n1,101.500,201.250,1\n2,103.000,202.500,1\n"


def test_load_three_rows():
    traj = load_trajectory(CSV_3ROWS)
    assert len(traj) == 3
    assert traj.observations[1].x == 101.5
    assert traj.observations[2].frame_index == 2


def test_load_repeated_frame_names_line():
    data = b"frame,x,y,detected\n0,1.000,1.000,1\n0,2.000,2.000,1\n"
    with pytest.raises(FormatError, match="line 3"):
        load_trajectory(data)


def test_load_decreasing_frame():
    data = b"frame,x,y,detected\n5,1.000,1.000,1\n2,2.000,2.000,1\n"
    with pytest.raises(FormatError, match="line 3"):
        load_trajectory(data)


def test_load_out_of_bounds_x():
    data = b"frame,x,y,detected\n0,2500.000,10.000,1\n"
    with pytest.raises(FormatError, match="line 2"):
        load_trajectory(data)


def test_load_empty_file():
    with pytest.raises(FormatError, match="empty"):
        load_trajectory(b"")


def test_load_bad_header():
    with pytest.raises(FormatError, match="line 1"):
        load_trajectory(b"frame,x,y\n0,1,1\n")


def test_load_undetected_with_coordinates_rejected():
    data = b"frame,x,y,detected\n0,5.000,5.000,0\n"
    with pytest.raises(FormatError, match="line 2"):
        load_trajectory(data)


def test_load_detected_missing_coordinates_rejected():
    data = b"frame,x,y,detected\n0,,,1\n"
    with pytest.raises(FormatError, match="line 2"):
        load_trajectory(data)


def test_load_bad_detected_flag():
    data = b"frame,x,y,detected\n0,1.000,1.000,2\n"
    with pytest.raises(FormatError, match="detected"):
        load_trajectory(data)


def test_undetected_rows_parse():
    data = b"frame,x,y,detected\n0,1.000,1.000,1\n1,,,0\n2,2.000,2.000,1\n"
    traj = load_trajectory(data)
    assert [o.detected for o in traj.observations] == [True, False, True]
    assert traj.observations[1].x is None


def test_drop_missing_identity_when_all_detected():
    traj = load_trajectory(CSV_3ROWS)
    assert drop_missing(traj) == traj


def test_drop_missing_keeps_original_timestamps():
    traj = trajectory_from_arrays(
        frames=[0, 1, 2, 3, 4],
        x=[10, 0, 20, 0, 30],
        y=[10, 0, 20, 0, 30],
        detected=[True, False, True, False, True],
    )
    dropped = drop_missing(traj)
    assert [o.frame_index for o in dropped.observations] == [0, 2, 4]
    assert [o.t for o in dropped.observations] == [0.0, 2 / 120.0, 4 / 120.0]


def test_drop_missing_insufficient_data():
    traj = trajectory_from_arrays([0, 1, 2], [0, 0, 0], [0, 0, 0],
                                  [False, False, False])
    with pytest.raises(DomainError, match="insufficient"):
        drop_missing(traj)


@given(st.lists(st.booleans(), min_size=2, max_size=50))
@settings(max_examples=60, deadline=None)
def test_drop_missing_idempotent(flags):
    if sum(flags) < 2:
        flags = flags + [True, True]
    traj = trajectory_from_arrays(
        frames=list(range(len(flags))),
        x=[float(i) for i in range(len(flags))],
        y=[float(i) for i in range(len(flags))],
        detected=flags,
    )
    once = drop_missing(traj)
    assert drop_missing(once) == once


def test_round_trip_byte_identical():
    traj = load_trajectory(CSV_3ROWS)
    assert format_trajectory_csv(traj).encode() == CSV_3ROWS


def test_round_trip_with_undetected_rows():
    data = b"frame,x,y,detected\n0,1.125,2.250,1\n3,,,0\n7,1919.999,1079.875,1\n"
    traj = load_trajectory(data)
    assert format_trajectory_csv(traj).encode() == data


@given(st.integers(min_value=0, max_value=10_000_000),
       st.sampled_from([30.0, 60.0, 90.0, 120.0, 240.0]))
@settings(max_examples=200, deadline=None)
def test_time_times_fps_recovers_frame_within_ulp(frame, fps):
    obs = make_observation(frame, fps, 1.0, 1.0, True)
    recovered = obs.t * fps
    assert abs(recovered - frame) <= math.ulp(max(float(frame), recovered))


def test_trajectory_invariants_enforced():
    with pytest.raises(DomainError):
        Trajectory((make_observation(0, 120, 1, 1, True),
                    make_observation(0, 120, 2, 2, True)))
    with pytest.raises(DomainError):
        trajectory_from_arrays([0], [5000.0], [1.0], [True])
    with pytest.raises(DomainError):
        Trajectory((), fps=-1)
