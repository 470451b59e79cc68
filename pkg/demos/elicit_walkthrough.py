"""Label traffic segments through a signal ranking and fit a reward model.

Collects random-policy rollouts on one intersection, cuts them into
16-step segments, elicits pairwise preferences (queue first, then wait,
then the rest) and trains a Bradley-Terry reward model on the labels.

    python demos/elicit_walkthrough.py
"""
import numpy as np

from heron.core import SignalHierarchy, aggregate_many, compute_margins, cut_segments
from heron.elicit import build_preference_dataset, utilization_fractions
from heron.envs import TrafficConfig, TrafficEnv
from heron.envs.traffic import SIGNAL_NAMES, SIGNAL_SENSES
from heron.reward import RewardTrainConfig, segment_rewards, train_reward_model

rng = np.random.default_rng(0)
env = TrafficEnv(TrafficConfig(1, 1, episode_length=400), seed=0)

obs_log, act_log, sig_log = [], [], []
obs = env.reset()
for _ in range(4800):
    act = rng.integers(0, 2, size=1)
    nxt, z, _, done, _ = env.step(act)
    obs_log.append(obs[0]); act_log.append(act[0]); sig_log.append(z[0])
    obs = env.reset() if done else nxt
pool = cut_segments(np.array(obs_log), np.array(act_log), np.array(sig_log), length=16)
print(f"{len(pool)} segments of 16 steps")

order = ("q", "wt", "dl", "em", "fl", "vl")
h = SignalHierarchy.from_names(order, SIGNAL_NAMES, SIGNAL_SENSES)
margins = compute_margins(pool, h, multiplier=0.5)
print("margins:", ", ".join(f"{n}={d:.2f}" for n, d in zip(order, margins.deltas)))

data = build_preference_dataset(pool, h, margins, 1000, rng)
fr = utilization_fractions(data.stats)
print(f"{len(data)} labelled pairs; decided at each level:")
for name, f in zip(order + ("discard",), fr):
    print(f"  {name:8s} {f:6.1%}")

model, acc = train_reward_model(data, RewardTrainConfig(epochs=30, hidden=(32, 32)), rng=rng)
print(f"holdout pair accuracy {acc:.3f}")

# the learned segment return should track the top-ranked signal
q = aggregate_many(pool)[:, 0]
r = segment_rewards(model, pool)
print(f"corr(learned return, -queue) = {np.corrcoef(r, -q)[0, 1]:.3f}")
