"""Train signal controllers on one intersection under different rewards.

Compares the learned hierarchical reward against the hand-weighted
engineered reward, the ground-truth reward and a random controller.
Two seeds per source keep this to a couple of minutes; the acceptance
suite runs the full five-seed version.

    python demos/traffic_rewards.py
"""
from dataclasses import replace

import numpy as np

from heron.harness import ExperimentConfig, evaluate, random_policy, run_seed
from heron.harness.experiment import eval_env

base = ExperimentConfig(
    name="demo", env_params={"grid_rows": 1, "grid_cols": 1, "discharge_rate": 1,
                             "episode_length": 300},
    total_steps=6000, learning_starts=1000, eval_period=2000, eval_episodes=5,
    seeds=(0, 1)).validate()

env = eval_env(base)
rand = np.mean([evaluate(random_policy(2, s), env, 5, base.eval_seed).mean_return
                for s in base.seeds])
print(f"{'random':14s} {rand:9.1f}")

for label, cfg in [("heron", replace(base, reward_source="heron")),
                   ("engineered", replace(base, reward_source="engineered")),
                   ("ground-truth", replace(base, reward_source="ground-truth"))]:
    finals = []
    for seed in cfg.seeds:
        rec = run_seed(cfg, seed)
        finals.append(rec.final.mean_return)
        curve = " ".join(f"{r['eval_return']:.0f}" for r in rec.rows)
        print(f"  {label} seed {seed}: eval returns by step {curve}")
    print(f"{label:14s} {np.mean(finals):9.1f}")

rec = run_seed(replace(base, reward_source="heron"), 0)
acc = rec.rows[-1]["reward_accuracy"]
util = rec.rows[-1]["utilization"]
print(f"last reward round holdout accuracy {acc:.2f}; "
      f"decided by queue {util[0]:.0%}, discarded {rec.rows[-1]['discard_fraction']:.0%}")
