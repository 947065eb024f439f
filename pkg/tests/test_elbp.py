import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eventshape import elbp
from eventshape.elbp import (REPRESENTATIVES, canonicalize, code_window, raw_pattern, rotate8,
                             weight_of)
from eventshape.events import Event, accumulate_polarity

from conftest import make_window


class TestCanonical:
    def test_zero(self):
        c = canonicalize(0)
        assert (c.representative, c.canonical, c.transitions) == (0, 36, 0)

    def test_full(self):
        assert canonicalize(255).canonical == 1

    def test_rotated_pair(self):
        a, b = canonicalize(0b00110000), canonicalize(0b11000000)
        assert a.canonical == b.canonical
        assert a.transitions == b.transitions == 2

    @given(st.integers(0, 255), st.integers(0, 7))
    def test_rotation_invariant(self, raw, k):
        assert canonicalize(raw).canonical == canonicalize(rotate8(raw, k)).canonical

    def test_census(self):
        classes = [canonicalize(v).canonical for v in range(256)]
        assert len(set(classes)) == 36
        assert [v for v in range(256) if classes[v] == 36] == [0]
        assert [v for v in range(256) if classes[v] == 1] == [255]

    def test_transitions_even(self):
        assert all(canonicalize(v).transitions % 2 == 0 for v in range(256))

    def test_representatives_map_to_themselves(self):
        for cid, rep in enumerate(REPRESENTATIVES, start=1):
            code = canonicalize(rep)
            assert code.canonical == cid and code.representative == rep

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            canonicalize(256)


class TestWeights:
    def test_table_values(self):
        assert weight_of(36) == 0.3
        assert weight_of(24) == 1.0
        assert weight_of(13) == 0.75
        assert weight_of(17) == 0.5

    def test_total(self):
        assert all(weight_of(c) in (1.0, 0.75, 0.5, 0.3) for c in range(1, 37))

    @pytest.mark.parametrize("bad", [0, 37, -1])
    def test_outside(self, bad):
        with pytest.raises(ValueError):
            weight_of(bad)

    def test_accepts_code(self):
        assert weight_of(canonicalize(0)) == 0.3


class TestRawPattern:
    def test_isolated(self):
        w = make_window([5], [5])
        assert raw_pattern(accumulate_polarity(w), Event(5, 5, 0, 1)) == 0

    def test_surrounded(self):
        xs = [4, 5, 6, 4, 5, 6, 4, 5, 6]
        ys = [4, 4, 4, 5, 5, 5, 6, 6, 6]
        w = make_window(xs, ys)
        assert raw_pattern(accumulate_polarity(w), Event(5, 5, 0, 1)) == 255

    def test_left_right_is_line(self):
        w = make_window([4, 5, 6], [5, 5, 5])
        raw = raw_pattern(accumulate_polarity(w), Event(5, 5, 0, 1))
        assert raw == (1 << 3) | (1 << 7)
        assert canonicalize(raw).tag == "LINE"

    def test_bit_order_clockwise_from_top_left(self):
        w = make_window([5, 4], [5, 4])
        assert raw_pattern(accumulate_polarity(w), Event(5, 5, 0, 1)) == 1
        w = make_window([5, 5], [5, 4])
        assert raw_pattern(accumulate_polarity(w), Event(5, 5, 0, 1)) == 2

    def test_opposite_polarity_does_not_match(self):
        w = make_window([4, 5], [5, 5], ps=[-1, 1])
        assert raw_pattern(accumulate_polarity(w), Event(5, 5, 0, 1)) == 0

    def test_off_grid(self):
        w = make_window([0, 1], [0, 0])
        assert raw_pattern(accumulate_polarity(w), Event(0, 0, 0, 1)) == 1 << 3

    def test_empty_centre_raises(self):
        w = make_window([4], [4])
        with pytest.raises(ValueError):
            raw_pattern(accumulate_polarity(w), Event(9, 9, 0, 1))

    def test_vectorised_matches_scalar(self, rng):
        xs = rng.integers(0, 12, 80)
        ys = rng.integers(0, 12, 80)
        w = make_window(xs, ys, ps=rng.choice([-1, 1], 80))
        m = accumulate_polarity(w)
        vec = elbp.raw_patterns(m, w.x, w.y)
        for i, e in enumerate(w):
            assert vec[i] == raw_pattern(m, e)


class TestCodeWindow:
    def test_segment(self):
        w = make_window(list(range(10, 20)), [7] * 10)
        codes = code_window(w, "polarity")
        tags = codes.tags
        assert tags[0] == tags[-1] == "ENDPOINT"
        assert set(tags[1:-1]) == {"LINE"}

    def test_lone_event(self):
        w = make_window([10, 11, 40], [10, 10, 40])
        codes = code_window(w)
        assert codes.canonical[2] == 36
        assert codes.weights[2] == 0.3

    def test_direction_mode_all_different(self):
        w = make_window([10, 11, 12, 13], [10, 10, 10, 10])
        codes = code_window(w, "direction", np.array([1, 2, 3, 4]))
        assert codes.canonical.tolist() == [36] * 4

    def test_direction_mode_invalid_is_isolated(self):
        w = make_window([10, 11, 12], [10, 10, 10])
        codes = code_window(w, "direction", np.array([2, 0, 2]))
        assert codes.canonical[1] == 36

    def test_direction_mode_needs_dirs(self):
        with pytest.raises(ValueError):
            code_window(make_window([1], [1]), "direction")

    def test_getitem(self):
        w = make_window([4, 5, 6], [5, 5, 5])
        c = code_window(w)[1]
        assert c.tag == "LINE" and c.raw == 136
