import math

import pytest
from hypothesis import given, settings, strategies as st

from mcastsim.engine import EventQueue, SimulationError, rng_stream, seconds_to_us
from mcastsim.mobility import RandomWaypoint, Static, Trajectory, position_at

# -- engine ------------------------------------------------------------------------


def test_events_come_out_in_time_order_ties_fifo():
    q = EventQueue()
    q.schedule(30, 0, "c")
    q.schedule(10, 0, "a")
    q.schedule(10, 1, "b")
    q.schedule(20, 0, "x")
    out = []
    while (ev := q.advance()) is not None:
        out.append((ev.time, ev.kind))
    assert out == [(10, "a"), (10, "b"), (20, "x"), (30, "c")]
    assert q.now == 30


def test_past_scheduling_raises():
    q = EventQueue()
    q.schedule(5, 0, "a")
    q.advance()
    with pytest.raises(SimulationError):
        q.schedule(4, 0, "late")
    q.schedule(5, 0, "same-time-ok")


def test_empty_queue():
    q = EventQueue()
    assert q.advance() is None
    assert q.peek_time() is None
    assert len(q) == 0


@given(st.lists(st.integers(0, 1000), max_size=50))
def test_queue_is_sorted_stable(times):
    q = EventQueue()
    for i, t in enumerate(times):
        q.schedule(t, i, "e")
    got = []
    while (ev := q.advance()) is not None:
        got.append((ev.time, ev.target))
    assert got == sorted((t, i) for i, t in enumerate(times))


def test_rng_streams_independent_and_reproducible():
    a = [rng_stream(1, 3, "backoff").random() for _ in range(3)]
    b = [rng_stream(1, 3, "backoff").random() for _ in range(3)]
    assert a == b
    assert rng_stream(1, 3, "backoff").random() != rng_stream(1, 4, "backoff").random()
    assert rng_stream(1, 3, "backoff").random() != rng_stream(2, 3, "backoff").random()
    assert rng_stream(1, 3, "backoff").random() != rng_stream(1, 3, "fading").random()


def test_seconds_to_us():
    assert seconds_to_us(1.5) == 1_500_000
    assert seconds_to_us(0.0000015) == 2


# -- mobility ----------------------------------------------------------------------


def test_static_never_moves():
    tr = Trajectory(Static(3.0, -4.0), rng_stream(1, 0, "mobility"))
    assert tr.position(0) == (3.0, -4.0) == tr.position(1e6)
    assert list(tr.legs(100)) == []


def test_negative_time_rejected():
    tr = Trajectory(RandomWaypoint(), rng_stream(1, 0, "mobility"))
    with pytest.raises(ValueError):
        tr.position(-1)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 5.0), st.floats(0, 3))
def test_waypoint_stays_in_area_and_under_speed(seed, v_max, pause):
    m = RandomWaypoint(width=60, height=40, v_min=min(0.1, v_max), v_max=v_max, pause_s=pause,
                       x0=-30, y0=-20)
    tr = Trajectory(m, rng_stream(seed, 1, "mobility"))
    for t0, p0, t1, p1 in tr.legs(120.0):
        assert m.contains(*p0) and m.contains(*p1)
        if t1 > t0:
            speed = math.hypot(p1[0] - p0[0], p1[1] - p0[1]) / (t1 - t0)
            assert speed <= v_max * (1 + 1e-9)
    prev = tr.position(0)
    for k in range(1, 240):
        p = tr.position(k * 0.5)
        assert m.contains(*p)
        assert math.hypot(p[0] - prev[0], p[1] - prev[1]) <= v_max * 0.5 + 1e-6
        prev = p


def test_waypoint_replay_independent_of_query_pattern():
    m = RandomWaypoint()
    a = Trajectory(m, rng_stream(9, 2, "mobility"))
    b = Trajectory(m, rng_stream(9, 2, "mobility"))
    b.position(500.0)  # jump ahead first
    for t in (0.0, 3.3, 17.0, 250.0, 499.9):
        assert a.position(t) == b.position(t)
    assert position_at(m, 2, 17.0, 9) == a.position(17.0)


def test_waypoint_pauses_at_destination():
    m = RandomWaypoint(v_min=1.0, v_max=1.0, pause_s=2.0)
    tr = Trajectory(m, rng_stream(4, 0, "mobility"))
    t0, p0, t1, p1 = next(iter(tr.legs(1.0)))
    assert tr.position(t1 + 1.0) == p1


def test_waypoint_validation():
    assert RandomWaypoint().validate() == []
    bad = RandomWaypoint(width=0, v_min=2, v_max=1, pause_s=-1)
    assert {f for f, _ in bad.validate()} == {"width", "v_min", "pause_s"}
