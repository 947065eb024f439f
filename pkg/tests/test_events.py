import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventshape.events import (OFF, ON, Event, EventStream, EventWindow, FramingConfig,
                               accumulate_direction, accumulate_polarity, frame_stream,
                               spatial_bounding_box, window_starts)

from conftest import make_window, random_stream


def stream_of(n):
    return EventStream(np.arange(n) % 128, np.zeros(n, int), np.arange(n), np.ones(n, int))


class TestFraming:
    def test_250_events(self):
        ws = frame_stream(stream_of(250), FramingConfig(150, 50))
        assert [w.start_index for w in ws] == [0, 50, 100]
        assert all(len(w) == 150 for w in ws)

    def test_overlap_is_100_events(self):
        ws = frame_stream(stream_of(400), FramingConfig(150, 50))
        for a, b in zip(ws, ws[1:]):
            assert np.array_equal(a.t[50:], b.t[:100])

    def test_short_stream_gives_nothing(self):
        assert frame_stream(stream_of(149), FramingConfig(150, 50)) == []

    @given(st.integers(0, 2000), st.integers(1, 300), st.integers(1, 300))
    def test_frame_count(self, M, N, B):
        if B > N:
            N, B = B, N
        cfg = FramingConfig(N, B)
        expected = (M - N) // B + 1 if M >= N else 0
        assert len(window_starts(M, cfg)) == expected

    def test_time_scaling_keeps_membership(self, rng):
        s = random_stream(rng, 700, tmax=10**6)
        s = EventStream(s.x, s.y, s.t * 2, s.p)
        base = frame_stream(s, FramingConfig(150, 50))
        for k in (0.5, 2, 10):
            scaled = frame_stream(s.scaled_time(k), FramingConfig(150, 50))
            assert [w.start_index for w in scaled] == [w.start_index for w in base]
            for a, b in zip(base, scaled):
                assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)

    @pytest.mark.parametrize("N,B", [(0, 1), (10, 0), (10, 11)])
    def test_bad_config(self, N, B):
        with pytest.raises(ValueError):
            FramingConfig(N, B)

    def test_duration(self):
        w = make_window([1, 2, 3], [1, 1, 1], ts=[5, 9, 25])
        assert w.duration_us == 20


class TestAccumulation:
    def test_single_on(self):
        m = accumulate_polarity(make_window([3], [4]))
        assert m.at(3, 4) == 1
        assert np.count_nonzero(m.grid) == 1
        assert m.grid[4, 3] == 1

    def test_last_write_wins(self):
        m = accumulate_polarity(make_window([3, 3], [4, 4], ps=[ON, OFF]))
        assert m.at(3, 4) == -1

    def test_empty(self):
        w = EventWindow([], [], [], [])
        assert not accumulate_polarity(w).grid.any()

    def test_direction_map(self):
        w = make_window([5, 6, 6], [5, 5, 5])
        m = accumulate_direction(w, [2, 1, 3])
        assert m.at(5, 5) == 2 and m.at(6, 5) == 3

    def test_invalid_direction_stays_zero(self):
        m = accumulate_direction(make_window([5], [5]), [0])
        assert m.at(5, 5) == 0

    def test_direction_length_mismatch(self):
        with pytest.raises(ValueError):
            accumulate_direction(make_window([1, 2], [1, 1]), [1])

    def test_idempotent_for_distinct_pixels(self, rng):
        idx = rng.choice(128 * 128, 50, replace=False)
        w = make_window(idx % 128, idx // 128, ps=rng.choice([-1, 1], 50))
        m = accumulate_polarity(w)
        assert np.array_equal(m.grid[w.y, w.x], w.p)

    @settings(max_examples=50)
    @given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7), st.sampled_from([-1, 1])),
                    min_size=1, max_size=40))
    def test_last_write_matches_loop(self, evs):
        xs, ys, ps = zip(*evs)
        m = accumulate_polarity(make_window(xs, ys, ps=ps))
        ref = np.zeros((128, 128), int)
        for x, y, p in evs:
            ref[y, x] = p
        assert np.array_equal(m.grid, ref)


class TestBoundingBox:
    def test_two_points(self):
        assert spatial_bounding_box(make_window([0, 10], [0, 20])) == (0, 10, 0, 20)

    def test_single(self):
        assert spatial_bounding_box(make_window([7], [7])) == (7, 7, 7, 7)

    def test_full_sensor(self):
        assert spatial_bounding_box(make_window([0, 127], [127, 0])) == (0, 127, 0, 127)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            spatial_bounding_box(EventWindow([], [], [], []))


class TestStream:
    def test_validate(self):
        EventStream([1], [1], [0], [1]).validate()
        with pytest.raises(ValueError):
            EventStream([128], [1], [0], [1]).validate()
        with pytest.raises(ValueError):
            EventStream([1, 1], [1, 1], [5, 4], [1, 1]).validate()
        with pytest.raises(ValueError):
            EventStream([1], [1], [0], [0]).validate()

    def test_from_events_roundtrip(self):
        evs = [Event(1, 2, 3, ON), Event(4, 5, 6, OFF)]
        s = EventStream.from_events(evs)
        assert list(s) == evs

    def test_scaled_time_must_stay_integral(self):
        with pytest.raises(ValueError):
            EventStream([1], [1], [3], [1]).scaled_time(0.5)
