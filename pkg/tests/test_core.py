import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heron.core import (InsufficientDataError, InvalidInputError, MarginSet, SignalHierarchy,
                        TrajectorySegment, aggregate_signals, compute_margins, concat_segments,
                        cut_segments, read_segment_records, write_segment_records)

from conftest import agg_segment, make_segment


def brute_population_std(values):
    mean = sum(values) / len(values)
    return math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))


class TestAggregate:
    def test_sum_over_steps(self):
        seg = make_segment([[1.0], [2.0], [3.0]])
        assert aggregate_signals(seg)[0] == 6.0

    def test_zero_signals(self):
        seg = make_segment(np.zeros((4, 3)))
        np.testing.assert_array_equal(aggregate_signals(seg), np.zeros(3))

    def test_single_step_identity(self):
        seg = make_segment([[-0.5, 2.0]])
        np.testing.assert_array_equal(aggregate_signals(seg), [-0.5, 2.0])

    def test_empty_segment_rejected(self):
        with pytest.raises(InvalidInputError):
            TrajectorySegment(np.zeros((0, 2)), np.zeros(0, dtype=int), np.zeros((0, 2)))

    def test_nonfinite_signal_rejected(self):
        with pytest.raises(InvalidInputError):
            make_segment([[np.nan, 1.0]])

    def test_segment_is_immutable(self):
        seg = make_segment([[1.0, 2.0]])
        with pytest.raises(ValueError):
            seg.signals[0, 0] = 5.0

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-100, 100), min_size=2, max_size=20), st.integers(1, 9))
    def test_additive_under_concatenation(self, values, cut):
        cut = min(cut, len(values) - 1)
        z = np.array(values).reshape(-1, 1)
        a, b = make_segment(z[:cut]), make_segment(z[cut:], seed=1)
        whole = concat_segments(a, b)
        np.testing.assert_allclose(aggregate_signals(whole),
                                   aggregate_signals(a) + aggregate_signals(b), atol=1e-9)


class TestMargins:
    H1 = SignalHierarchy((0,))

    def test_population_std(self):
        segs = [agg_segment([v]) for v in (1, 2, 3)]
        expected = brute_population_std([1, 2, 3])
        assert expected == pytest.approx(0.81650, abs=1e-5)
        assert compute_margins(segs, self.H1).deltas[0] == pytest.approx(expected, rel=1e-12)

    def test_constant_signal_gives_zero(self):
        segs = [agg_segment([5.0]) for _ in range(3)]
        assert compute_margins(segs, self.H1).deltas == (0.0,)

    def test_multiplier(self):
        segs = [agg_segment([v]) for v in (1, 2, 3)]
        expected = 2 * brute_population_std([1, 2, 3])
        assert expected == pytest.approx(1.63299, abs=1e-5)
        assert compute_margins(segs, self.H1, multiplier=2.0).deltas[0] == pytest.approx(expected)

    def test_too_few_segments(self):
        with pytest.raises(InsufficientDataError):
            compute_margins([agg_segment([1.0])], self.H1)

    def test_margins_follow_hierarchy_order(self):
        segs = [agg_segment([v, 10 * v]) for v in (1, 2, 3)]
        m = compute_margins(segs, SignalHierarchy((1, 0)))
        assert m.deltas[0] == pytest.approx(10 * m.deltas[1])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=15),
           st.floats(-1e3, 1e3), st.floats(0.01, 100))
    def test_translation_invariant_and_homogeneous(self, values, shift, scale):
        base = [agg_segment([v]) for v in values]
        shifted = [agg_segment([v + shift]) for v in values]
        scaled = [agg_segment([v * scale]) for v in values]
        d = compute_margins(base, self.H1).deltas[0]
        assert d >= 0
        assert compute_margins(shifted, self.H1).deltas[0] == pytest.approx(d, abs=1e-6 * (1 + abs(shift)))
        assert compute_margins(scaled, self.H1).deltas[0] == pytest.approx(scale * d, rel=1e-9, abs=1e-9)

    def test_negative_margin_rejected(self):
        with pytest.raises(InvalidInputError):
            MarginSet((-0.1,))


class TestHierarchy:
    def test_not_a_permutation(self):
        with pytest.raises(InvalidInputError):
            SignalHierarchy((0, 0, 1))

    def test_from_names_unknown(self):
        with pytest.raises(InvalidInputError, match="hierarchy"):
            SignalHierarchy.from_names(["q", "bogus"], ["q", "wt"])

    def test_ranked_flips_costs(self):
        h = SignalHierarchy((1, 0), senses=(-1, 1))
        np.testing.assert_array_equal(h.ranked([3.0, 4.0]), [4.0, -3.0])


def test_segment_records_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    segs = [make_segment(rng.normal(size=(4, 3)), seed=i, rewards=rng.normal(size=4), sid=i)
            for i in range(3)]
    path = tmp_path / "segs.csv"
    assert write_segment_records(path, segs) == 12
    back = read_segment_records(path)
    assert len(back) == 3
    for a, b in zip(segs, back):
        np.testing.assert_array_equal(a.states, b.states)
        np.testing.assert_array_equal(a.actions, b.actions)
        np.testing.assert_array_equal(a.signals, b.signals)
        np.testing.assert_array_equal(a.rewards, b.rewards)


def test_continuous_action_records(tmp_path):
    seg = TrajectorySegment(np.ones((2, 3)), np.array([[0.5], [-1.25]]), np.ones((2, 2)))
    write_segment_records(tmp_path / "c.csv", [seg])
    back = read_segment_records(tmp_path / "c.csv")[0]
    np.testing.assert_array_equal(back.actions, seg.actions)
    assert back.rewards is None


def test_cut_segments_drops_remainder():
    z = np.arange(10.0).reshape(-1, 1)
    segs = cut_segments(np.zeros((10, 1)), np.zeros(10, dtype=int), z, length=4)
    assert [len(s) for s in segs] == [4, 4]
    assert aggregate_signals(segs[1])[0] == 4 + 5 + 6 + 7
