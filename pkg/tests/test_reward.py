import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heron.core import (InsufficientDataError, InvalidInputError, MarginSet, PreferencePair,
                        SignalHierarchy, TrajectorySegment)
from heron.elicit import PreferenceDataset, UtilizationStats
from heron.nn import MlpParams, MlpSpec, grad_check
from heron.reward import (AnnealedSchedule, RewardModel, RewardTrainConfig, ScalingRule,
                          avg_win_level, bt_loss, load_reward_model, make_reward_model,
                          pairwise_accuracy, save_reward_model, scale_reward, schedule_next,
                          segment_reward, segment_rewards, train_reward_model)

from conftest import agg_segment


def constant_model(value, state_dim=1, action_dim=2, gamma=1.0):
    """Reward model whose output is ``value`` everywhere (zero weights, bias)."""
    m = make_reward_model(state_dim, action_dim, hidden=(3,), gamma=gamma, zero_output=True)
    m.net.biases[-1][:] = value
    return m


def state_model(gamma=1.0):
    """Linear model r(s, a) = s_0."""
    spec = MlpSpec((3, 1))
    net = MlpParams(spec, [np.array([[1.0], [0.0], [0.0]])], [np.zeros(1)])
    return RewardModel(net, 1, 2, True, gamma)


def seg_with_states(values):
    k = len(values)
    return TrajectorySegment(np.array(values, dtype=float)[:, None], np.zeros(k, dtype=int),
                             np.zeros((k, 1)))


class TestSegmentReward:
    def test_undiscounted_sum(self):
        assert segment_reward(state_model(), seg_with_states([1, 2, 3])) == 6.0

    def test_discounted(self):
        assert segment_reward(state_model(0.5), seg_with_states([1, 1, 1])) == 1 + 0.5 + 0.25

    def test_single_step(self):
        assert segment_reward(state_model(0.3), seg_with_states([4.5])) == 4.5

    def test_batch_matches_single(self):
        m = make_reward_model(1, 2, gamma=0.9, rng=np.random.default_rng(0))
        segs = [seg_with_states(np.random.default_rng(i).normal(size=i + 1)) for i in range(5)]
        np.testing.assert_allclose(segment_rewards(m, segs), [segment_reward(m, s) for s in segs])

    def test_dimension_mismatch(self):
        seg = TrajectorySegment(np.zeros((2, 3)), np.zeros(2, dtype=int), np.zeros((2, 1)))
        with pytest.raises(InvalidInputError):
            segment_reward(state_model(), seg)

    def test_continuous_actions(self):
        m = make_reward_model(2, 1, discrete=False, rng=np.random.default_rng(0))
        seg = TrajectorySegment(np.zeros((3, 2)), np.ones((3, 1)), np.zeros((3, 1)))
        assert np.isfinite(segment_reward(m, seg))


class TestBtLoss:
    def pair(self, a, b):
        return PreferencePair(seg_with_states(a), seg_with_states(b), 1)

    def test_equal_scores(self):
        loss, _ = bt_loss(state_model(), [self.pair([1.0], [1.0])])
        assert loss == pytest.approx(math.log(2), abs=1e-15)

    @pytest.mark.parametrize("gap", [10.0, -10.0])
    def test_gap_values(self, gap):
        loss, _ = bt_loss(state_model(), [self.pair([gap], [0.0])])
        expected = math.log1p(math.exp(-gap))
        assert loss == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(4.5398e-5 if gap > 0 else 10.0000454, rel=1e-4)

    def test_empty_batch(self):
        with pytest.raises(InvalidInputError):
            bt_loss(state_model(), [])

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-20, 20), st.floats(0.01, 5))
    def test_positive_and_decreasing_in_gap(self, gap, inc):
        l1, _ = bt_loss(state_model(), [self.pair([gap], [0.0])])
        l2, _ = bt_loss(state_model(), [self.pair([gap + inc], [0.0])])
        assert l1 > 0 and l2 > 0
        assert l2 < l1

    def test_shift_invariance_equal_length(self):
        rng = np.random.default_rng(0)
        m = make_reward_model(1, 2, rng=rng)
        pairs = [self.pair(rng.normal(size=4), rng.normal(size=4)) for _ in range(6)]
        l0, _ = bt_loss(m, pairs)
        m.net.biases[-1][:] += 3.7
        l1, _ = bt_loss(m, pairs)
        assert l1 == pytest.approx(l0, rel=1e-12)
        s = seg_with_states([0.1, 0.2, 0.3])
        shifted = segment_reward(m, s)
        m.net.biases[-1][:] -= 3.7
        assert shifted - segment_reward(m, s) == pytest.approx(3 * 3.7)

    @pytest.mark.parametrize("seed", range(5))
    def test_gradient_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        model = make_reward_model(2, 3, hidden=(5, 4), gamma=0.9, rng=rng)
        pairs = []
        for _ in range(4):
            # unequal lengths keep the output-bias gradient away from zero
            ka, kb = int(rng.integers(1, 4)), int(rng.integers(4, 7))
            mk = lambda k: TrajectorySegment(rng.normal(size=(k, 2)), rng.integers(0, 3, k),
                                             np.zeros((k, 1)))
            pairs.append(PreferencePair(mk(ka), mk(kb), 1))

        def loss_fn(p):
            return bt_loss(RewardModel(p, 2, 3, True, 0.9), pairs)

        rep = grad_check(model.net.spec, loss_fn, 1e-4, params=model.net)
        assert rep.passed, rep


def separable_dataset(n_pairs, rng, k=4, dim=3):
    """Winners' states dominate losers' by a margin along a fixed direction,
    labelled through the hierarchy on a signal equal to that projection."""
    w = np.array([1.0, -0.5, 0.25])[:dim]
    pairs = []
    for _ in range(n_pairs):
        s1 = rng.normal(size=(k, dim))
        s2 = rng.normal(size=(k, dim))
        z1, z2 = (s1 @ w)[:, None], (s2 @ w)[:, None]
        a = TrajectorySegment(s1, np.zeros(k, dtype=int), z1)
        b = TrajectorySegment(s2, np.zeros(k, dtype=int), z2)
        if z1.sum() == z2.sum():
            continue
        pairs.append(PreferencePair(a, b, 1) if z1.sum() > z2.sum() else PreferencePair(b, a, 1))
    return PreferenceDataset(pairs, UtilizationStats([len(pairs)], 0))


class TestTraining:
    def test_zero_output_initial_loss_is_ln2(self):
        rng = np.random.default_rng(0)
        ds = separable_dataset(20, rng)
        m = make_reward_model(3, 1, zero_output=True, rng=rng)
        loss, _ = bt_loss(m, ds.pairs)
        assert abs(loss - math.log(2)) <= 1e-12

    def test_separable_data_high_accuracy(self):
        rng = np.random.default_rng(1)
        ds = separable_dataset(300, rng)
        model, acc = train_reward_model(ds, RewardTrainConfig(epochs=30, hidden=(16,)), rng=rng)
        assert acc >= 0.9

    def test_single_pair_memorised(self):
        rng = np.random.default_rng(2)
        ds = separable_dataset(2, rng)
        cfg = RewardTrainConfig(epochs=200, holdout_fraction=0.0, hidden=(8,))
        model, acc = train_reward_model(ds, cfg, rng=rng)
        assert pairwise_accuracy(model, ds.pairs) == 1.0

    def test_degenerate_dataset_accuracy_half(self):
        seg = seg_with_states([1.0, 2.0])
        ds = PreferenceDataset([PreferencePair(seg, seg, 1)] * 10, UtilizationStats([10], 0))
        _, acc = train_reward_model(ds, RewardTrainConfig(epochs=2))
        assert acc == 0.5

    def test_too_small(self):
        ds = separable_dataset(1, np.random.default_rng(0))
        with pytest.raises(InsufficientDataError):
            train_reward_model(ds)

    def test_warm_start_does_not_mutate(self):
        rng = np.random.default_rng(3)
        ds = separable_dataset(20, rng)
        m0 = make_reward_model(3, 1, rng=rng)
        before = m0.net.flat()
        train_reward_model(ds, RewardTrainConfig(epochs=2), model=m0, rng=rng)
        np.testing.assert_array_equal(m0.net.flat(), before)

    def test_save_load(self, tmp_path):
        m = make_reward_model(3, 2, gamma=0.7, rng=np.random.default_rng(0))
        save_reward_model(tmp_path / "r.npz", m, ScalingRule(2.0, 8))
        back, rule = load_reward_model(tmp_path / "r.npz")
        assert back.gamma == 0.7 and rule == ScalingRule(2.0, 8)
        np.testing.assert_array_equal(back.net.flat(), m.net.flat())


class TestWinLevel:
    H = SignalHierarchy((0, 1, 2))
    M = MarginSet((0.5, 0.5, 0.5))

    def test_mean_of_levels(self):
        ref = [agg_segment([0, 0, 0]), agg_segment([1, 1, 0])]
        # beats ref 0 at level 1 and ref 1 at level 3
        assert avg_win_level(agg_segment([1, 1, 2]), ref, self.H, self.M) == 2.0

    def test_never_wins(self):
        ref = [agg_segment([5, 5, 5])]
        assert avg_win_level(agg_segment([0, 0, 0]), ref, self.H, self.M) == 0.0

    def test_always_level_one(self):
        ref = [agg_segment([0, 9, 9]), agg_segment([-3, 0, 0])]
        assert avg_win_level(agg_segment([4, 0, 0]), ref, self.H, self.M) == 1.0


class TestScaling:
    def test_alpha_one(self):
        assert scale_reward(-0.37, 2.5, ScalingRule(1.0)) == -0.37

    def test_alpha_two_f_three(self):
        assert scale_reward(0.5, 3, ScalingRule(2.0)) == 4.0

    def test_f_zero(self):
        assert scale_reward(1.23, 0, ScalingRule(3.0)) == 1.23

    def test_invalid(self):
        with pytest.raises(InvalidInputError):
            ScalingRule(0.5)
        with pytest.raises(InvalidInputError):
            scale_reward(1.0, -1.0, ScalingRule(2.0))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-10, 10), st.floats(0.01, 5), st.floats(0, 3), st.floats(1.01, 3))
    def test_monotone(self, raw, inc, F, alpha):
        rule = ScalingRule(alpha)
        assert scale_reward(raw + inc, F, rule) > scale_reward(raw, F, rule)
        if raw > 1e-300:  # subnormals cannot grow by a factor near 1
            assert scale_reward(raw, F + 0.5, rule) > scale_reward(raw, F, rule)


class TestSchedule:
    def test_intervals(self):
        s = AnnealedSchedule()
        assert s.interval(0) == 100
        assert s.interval(1) == 130

    def test_thresholds(self):
        assert AnnealedSchedule().thresholds(4) == [100, 230, 399, 619]

    def test_fires_at_thresholds(self):
        s = AnnealedSchedule()
        fired = []
        for step in range(0, 700):
            f, s = schedule_next(s, step)
            if f:
                fired.append(step)
        assert fired == [100, 230, 399, 619]

    def test_regression_rejected(self):
        _, s = schedule_next(AnnealedSchedule(), 50)
        with pytest.raises(InvalidInputError):
            schedule_next(s, 49)

    def test_linear_schedule(self):
        assert AnnealedSchedule(400, 1.0).thresholds(3) == [400, 800, 1200]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(10, 500), st.floats(1.05, 2.0))
    def test_intervals_increase(self, base, up):
        s = AnnealedSchedule(base, up)
        iv = [s.interval(t) for t in range(12)]
        assert all(b >= a for a, b in zip(iv, iv[1:]))
        assert iv[-1] > iv[0]

    def test_default_intervals_strictly_increase(self):
        s = AnnealedSchedule()
        iv = [s.interval(t) for t in range(30)]
        assert all(b > a for a, b in zip(iv, iv[1:]))
