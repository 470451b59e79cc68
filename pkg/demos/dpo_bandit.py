"""Preference labels from a signal ranking drive DPO on a toy bandit.

Two contexts, two arms; arm 0 wins the top-ranked signal by a wide gap
everywhere. The elicited labels feed a softmax policy trained with the
DPO loss against its initial self.

    python demos/dpo_bandit.py
"""
import numpy as np

from heron.core import MarginSet, PreferenceLabel, SignalHierarchy, TrajectorySegment
from heron.elicit import elicit_preference
from heron.envs import bandit_step, dominant_arm_bandit
from heron.policy import make_bandit_policy, train_dpo

cfg = dominant_arm_bandit(2, 2, best=0)
h, m = SignalHierarchy((0, 1)), MarginSet((1.0, 0.1))


def as_segment(z):
    return TrajectorySegment(np.zeros((1, 1)), np.zeros(1, dtype=int), z[None, :])


contexts, preferred, rejected = [], [], []
for c in range(cfg.num_contexts):
    a, b = as_segment(bandit_step(cfg, c, 0)), as_segment(bandit_step(cfg, c, 1))
    label, level = elicit_preference(a, b, h, m)
    win = 0 if label == PreferenceLabel.FIRST else 1
    print(f"context {c}: arm {win} preferred (decided at level {level})")
    contexts.append(c); preferred.append(win); rejected.append(1 - win)

pol = make_bandit_policy(2, 2, (8,), rng=np.random.default_rng(0))
print("before:", np.round(pol.probs([0, 1]), 3).tolist())
out = train_dpo(pol, np.repeat(contexts, 8), np.repeat(preferred, 8), np.repeat(rejected, 8),
                updates=2000, stop_prob=0.95)
print(f"after {out['updates']} updates:", np.round(pol.probs([0, 1]), 3).tolist())
print(f"loss {out['losses'][0]:.4f} -> {out['losses'][-1]:.4f}")
