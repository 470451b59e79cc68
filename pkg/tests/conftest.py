import numpy as np
import pytest

from heron.core import TrajectorySegment


def make_segment(signals, state_dim=2, seed=0, actions=None, rewards=None, sid=-1):
    """Segment with the given per-step signals and random states/actions."""
    signals = np.atleast_2d(np.asarray(signals, dtype=float))
    k = signals.shape[0]
    rng = np.random.default_rng(seed)
    states = rng.normal(size=(k, state_dim))
    if actions is None:
        actions = rng.integers(0, 2, size=k)
    return TrajectorySegment(states, actions, signals, rewards, sid)


def agg_segment(totals, seed=0):
    """One-step segment whose aggregate signals equal ``totals``."""
    return make_segment([list(totals)], seed=seed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
