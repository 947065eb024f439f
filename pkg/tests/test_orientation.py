import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eventshape.events import Event, EventWindow
from eventshape.orientation import (OrientationConfig, fit_plane, orient_window,
                                    plane_coefficients, quantize_direction)
from eventshape.synth import SyntheticScenario, synth_translating_contour
from eventshape.events import FramingConfig, frame_stream


def plane_events(a, b, c, xs, ys):
    return [Event(x, y, a * x + b * y + c, 1) for x, y in zip(xs, ys)]


class TestFitPlane:
    def test_vertical_edge(self):
        evs = plane_events(10.0, 0.0, 0.0, [0, 1, 2, 0, 1, 2], [0, 0, 0, 1, 1, 1])
        e, nb = evs[-1], evs[:-1]
        theta, amp = fit_plane(e, nb)
        assert theta == pytest.approx(0.0, abs=1e-12)
        assert amp == pytest.approx(10.0, rel=1e-12)

    def test_diagonal(self):
        evs = plane_events(5.0, 5.0, 3.0, [0, 1, 2, 0, 1], [0, 1, 0, 2, 2])
        theta, _ = fit_plane(evs[0], evs[1:])
        assert theta == pytest.approx(math.pi / 4, abs=1e-12)

    def test_coefficients(self):
        evs = plane_events(3.0, -7.0, 100.0, [4, 5, 6, 4, 6], [4, 4, 5, 6, 6])
        a, b, c = plane_coefficients(evs[0], evs[1:])
        assert (a, b, c) == pytest.approx((3.0, -7.0, 0.0), abs=1e-9)

    def test_single_point_is_invalid(self):
        evs = [Event(3, 3, t, 1) for t in range(5)]
        assert fit_plane(evs[0], evs[1:]) is None

    def test_collinear_is_invalid(self):
        evs = [Event(x, 3, 10 * x, 1) for x in range(6)]
        assert fit_plane(evs[0], evs[1:]) is None

    def test_too_few_neighbors(self):
        evs = plane_events(1.0, 2.0, 0.0, [0, 1, 0], [0, 0, 1])
        assert fit_plane(evs[0], evs[1:]) is None

    def test_theta_range(self):
        evs = plane_events(-1.0, -1.0, 0.0, [0, 1, 2, 0, 1], [0, 1, 0, 2, 2])
        theta, _ = fit_plane(evs[0], evs[1:])
        assert theta == pytest.approx(5 * math.pi / 4)


class TestQuantize:
    def test_centres(self):
        assert quantize_direction(0.0) == 1
        assert quantize_direction(math.pi / 4) == 2
        assert quantize_direction(math.pi / 2) == 3
        assert quantize_direction(3 * math.pi / 4) == 4

    def test_tie_rounds_up(self):
        assert quantize_direction(9 * math.pi / 8) == 2
        assert quantize_direction(math.pi / 8) == 2

    def test_wraps(self):
        assert quantize_direction(math.pi - 1e-6) == 1

    def test_mod_pi(self, rng):
        th = rng.uniform(0, 2 * math.pi, 1000)
        assert np.array_equal(quantize_direction(th), quantize_direction(th + math.pi))

    @given(st.floats(0, 2 * math.pi), st.integers(2, 12))
    def test_range(self, theta, V):
        assert 1 <= quantize_direction(theta, V) <= V

    def test_config_validation(self):
        for kw in ({"L": 4}, {"L": 1}, {"M": 2}, {"V": 1}, {"min_neighbors": 2}):
            with pytest.raises(ValueError):
                OrientationConfig(**kw)


def translating_window(direction=0.0, shape="diamond", N=150):
    sc = SyntheticScenario(kind="translating-contour", shape=shape, speed=1000.0,
                           duration=0.03, direction=direction, scale=12.0,
                           start_x=50.0, start_y=60.0)
    return frame_stream(synth_translating_contour(sc), FramingConfig(N, N))[2]


class TestOrientWindow:
    def test_vertical_segment(self):
        # a square moving in +x fires only on its vertical sides, far apart
        rect = ((-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0))
        sc = SyntheticScenario(kind="translating-contour", shape=rect, speed=1000.0,
                               duration=0.02, direction=0.0, scale=10.0, start_x=30.3,
                               start_y=64.3)
        w = frame_stream(synth_translating_contour(sc), FramingConfig(200, 200))[0]
        o = orient_window(w)
        d = o.direction[o.valid]
        assert len(d) > 100
        assert np.mean(d == 1) > 0.9

    def test_single_event(self):
        o = orient_window(EventWindow([1], [1], [1], [1]))
        assert o.direction.tolist() == [0]
        assert math.isnan(o[0].theta)

    def test_time_scaling(self):
        w = translating_window(30.0)
        base = orient_window(w)
        for s in (2, 10):
            o = orient_window(w.transformed(t=w.t * s))
            assert np.array_equal(o.direction, base.direction)

    def test_inversion_keeps_labels(self):
        w = translating_window(20.0, "heart")
        inv = w.transformed(x=w.x.min() + w.x.max() - w.x, y=w.y.min() + w.y.max() - w.y)
        a, b = orient_window(w), orient_window(inv)
        assert np.array_equal(a.direction, b.direction)
        ok = a.valid
        diff = np.mod(b.theta[ok] - a.theta[ok], 2 * math.pi)
        assert np.allclose(diff, math.pi, atol=1e-9)

    def test_deterministic(self):
        w = translating_window(70.0, "club")
        a, b = orient_window(w), orient_window(w)
        assert np.array_equal(a.direction, b.direction)
        assert np.array_equal(a.theta, b.theta, equal_nan=True)

    def test_neighbours_only_from_the_past(self):
        # the first event of a window never has earlier neighbours
        w = translating_window(0.0)
        assert orient_window(w).direction[0] == 0

    def test_error_shrinks_with_more_neighbours(self):
        rng = np.random.default_rng(3)
        a, b = 40.0, 15.0
        true = math.atan2(b, a)
        errs = []
        for M in (4, 8, 16):
            cfg = OrientationConfig(L=7, M=M)
            e_m = []
            for _ in range(300):
                xs = rng.integers(-3, 4, 30)
                ys = rng.integers(-3, 4, 30)
                ts = a * xs + b * ys + 1000 + rng.normal(0, 20.0, 30)
                e = Event(0, 0, 1e9, 1)
                nb = [Event(x, y, t, 1) for x, y, t in zip(xs, ys, ts)][:M]
                r = fit_plane(Event(0, 0, 1000.0, 1), nb, cfg)
                if r is not None:
                    e_m.append(abs(math.remainder(r[0] - true, 2 * math.pi)))
            errs.append(np.mean(e_m))
        assert errs[0] > errs[1] > errs[2]
