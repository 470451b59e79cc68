"""Seeded training runs, evaluation and run-directory layout.

A run directory holds::

    config.yaml        resolved config (single seed) used for the run
    metrics.jsonl      one JSON object per evaluation, steps increasing
    policy/            one tensor dump per agent (and ensemble member)
    reward_model.npz   learned reward model, HERON sources only
    utilization.txt    cumulative elicitation counts, HERON sources only
    timing.json        wall-clock, kept apart so metrics stay byte-identical
"""
from __future__ import annotations

import json
import logging
import math
import os
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from ..core import SignalHierarchy, cut_segments, write_segment_records
from ..elicit import utilization_fractions
from ..envs import PendulumEnv, Shift, ShiftedEnv, TrafficEnv, apply_shift
from ..policy import HeronConfig, QConfig, train_pg, train_q
from ..reward import RewardTrainConfig, save_reward_model
from .config import ENVIRONMENTS, ExperimentConfig, make_env_config, save_config
from .persist import save_policy

log = logging.getLogger(__name__)

OUTPUT_ENV_VAR = "HERON_OUTPUT_ROOT"


def output_root(override=None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get(OUTPUT_ENV_VAR, "runs"))


@dataclass
class EvalResult:
    mean_return: float
    signal_means: dict
    returns: list

    def as_dict(self) -> dict:
        return {"eval_return": self.mean_return, "signal_means": self.signal_means}


def evaluate(policy: Callable, env, episodes: int, seed: int,
             trace: Optional[list] = None) -> EvalResult:
    """Roll out ``policy`` for whole episodes and average.

    Returns the mean ground-truth return (summed over agents and steps) and
    the mean per-episode sum of each signal, keyed by signal name. With a
    ``trace`` list, each agent's episode is appended as an
    ``(obs, actions, signals, rewards)`` tuple of arrays.
    """
    returns, sums = [], []
    for e in range(episodes):
        obs = env.reset(seed + e)
        total, zsum, done = 0.0, 0.0, False
        steps = []
        while not done:
            act = policy(obs)
            nxt, z, r, done, _ = env.step(act)
            if trace is not None:
                steps.append((obs, np.asarray(act), z, r))
            obs = nxt
            total += float(np.sum(r))
            zsum = zsum + z.sum(axis=0)
        returns.append(total)
        sums.append(zsum)
        if trace is not None:
            for i in range(len(obs)):
                trace.append(tuple(np.array([s[k][i] for s in steps]) for k in range(4)))
    means = np.mean(sums, axis=0)
    names = env.signal_names
    return EvalResult(float(np.mean(returns)), {n: float(v) for n, v in zip(names, means)},
                      returns)


def trace_segments(trace: list, length: int) -> list:
    """Cut recorded evaluation episodes into segment records."""
    out = []
    for obs, act, z, r in trace:
        if act.ndim == 2 and act.shape[1] == 1 and np.issubdtype(act.dtype, np.integer):
            act = act[:, 0]
        out.extend(cut_segments(obs, act, z, r, length, start_id=len(out)))
    return out


def random_policy(num_actions: int, seed: int = 0) -> Callable:
    rng = np.random.default_rng(seed)
    return lambda obs: rng.integers(0, num_actions, size=len(obs))


def hierarchy_of(cfg: ExperimentConfig) -> SignalHierarchy:
    names, senses = ENVIRONMENTS[cfg.environment]
    return SignalHierarchy.from_names(cfg.resolved_hierarchy, names, senses)


def make_env(cfg: ExperimentConfig, seed: int, shifted: bool = True):
    env_cfg = make_env_config(cfg)
    if cfg.environment == "pendulum":
        return PendulumEnv(env_cfg, seed)
    env = TrafficEnv(env_cfg, seed)
    if cfg.shift is not None and shifted:
        env = ShiftedEnv(env, apply_shift(env_cfg, Shift(cfg.shift.param, cfg.shift.value,
                                                         cfg.shift.step)))
    return env


def eval_env(cfg: ExperimentConfig, step: Optional[int] = None):
    """Evaluation env under the config active at ``step`` (post-shift when None)."""
    env = make_env(cfg, cfg.eval_seed, shifted=False)
    if cfg.shift is not None and (step is None or step >= cfg.shift.step):
        sched = apply_shift(env.config, Shift(cfg.shift.param, cfg.shift.value, cfg.shift.step))
        env.config = sched.after
    return env


def heron_config(cfg: ExperimentConfig) -> HeronConfig:
    return HeronConfig(segment_length=cfg.segment_length, pairs_per_round=cfg.pairs_per_round,
                       margin_multiplier=cfg.margin_multiplier, pool_size=cfg.pool_size,
                       schedule_base=cfg.schedule_base, schedule_upsilon=cfg.schedule_upsilon,
                       reward=RewardTrainConfig(epochs=cfg.reward_epochs,
                                                hidden=tuple(cfg.reward_hidden)),
                       alpha=cfg.reward_alpha)


def _learner_fields(result) -> dict:
    learner = result.learner
    if learner is None or not learner.history:
        return {"reward_accuracy": None, "utilization": None, "discard_fraction": None}
    acc = next((h["accuracy"] for h in reversed(learner.history) if h["accuracy"] is not None),
               None)
    fr = utilization_fractions(learner.stats)
    return {"reward_accuracy": acc, "utilization": fr[:-1], "discard_fraction": fr[-1]}


def train_run(cfg: ExperimentConfig, seed: int, eval_fn: Optional[Callable] = None):
    """Train one seed; ``eval_fn(result, step)`` is called every ``eval.period`` steps."""
    rng = np.random.default_rng(seed)
    env = make_env(cfg, seed)
    source = "heron" if cfg.reward_source == "heron-scaled" else cfg.reward_source
    h = hierarchy_of(cfg)
    if cfg.environment == "traffic":
        qcfg = QConfig(hidden=tuple(cfg.policy_hidden), lr=cfg.policy_lr, gamma=cfg.policy_gamma)
        return train_q(env, source, h, cfg.total_steps, rng, qcfg, heron=heron_config(cfg),
                       beta=cfg.engineered_beta, ensemble_mode=cfg.ensemble_mode,
                       ensemble_gamma=cfg.ensemble_gamma, learning_starts=cfg.learning_starts,
                       eval_every=cfg.eval_period, eval_fn=eval_fn)
    ep_len = env.config.episode_length
    hcfg = replace(heron_config(cfg), segment_length=ep_len)
    every = max(1, cfg.eval_period // ep_len)
    return train_pg(env, source, h, max(1, cfg.total_steps // ep_len), rng, heron=hcfg,
                    beta=cfg.engineered_beta, hidden=tuple(cfg.policy_hidden), lr=cfg.policy_lr,
                    gamma=cfg.policy_gamma, eval_every=every, eval_fn=eval_fn)


@dataclass
class RunRecord:
    seed: int
    directory: Optional[Path]
    rows: list
    final: EvalResult
    result: object


def run_id(cfg: ExperimentConfig, seed: int) -> str:
    return f"{cfg.name}-seed{seed}"


def run_seed(cfg: ExperimentConfig, seed: int, directory: Optional[Path] = None) -> RunRecord:
    """Train and evaluate one seed, writing the run directory if one is given."""
    started = time.perf_counter()
    rows: list = []
    rid = run_id(cfg, seed)

    def on_eval(result, step):
        ev = evaluate(result.policy(), eval_env(cfg, step), cfg.eval_episodes, cfg.eval_seed)
        row = {"run_id": rid, "seed": seed, "step": step, **ev.as_dict(),
               **_learner_fields(result)}
        rows.append(row)
        return row

    result = train_run(cfg, seed, on_eval)
    final = evaluate(result.policy(), eval_env(cfg), cfg.eval_episodes, cfg.eval_seed)
    last_step = rows[-1]["step"] if rows else -1
    if last_step < cfg.total_steps:
        rows.append({"run_id": rid, "seed": seed, "step": cfg.total_steps, **final.as_dict(),
                     **_learner_fields(result)})
    if directory is not None:
        write_run(directory, cfg.with_seed(seed), rows, result,
                  time.perf_counter() - started)
    return RunRecord(seed, directory, rows, final, result)


def metrics_line(row: dict) -> str:
    return json.dumps(row, sort_keys=True, allow_nan=False, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_run(directory: Path, cfg: ExperimentConfig, rows: list, result,
              wall_clock: float) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_config(directory / "config.yaml", replace(cfg, hierarchy=cfg.resolved_hierarchy))
    with open(directory / "metrics.jsonl", "w") as fh:
        for row in rows:
            fh.write(metrics_line(row) + "\n")
    kind = "q" if cfg.environment == "traffic" else "pg"
    save_policy(directory / "policy", result, kind, cfg.environment)
    learner = result.learner
    if learner is not None and learner.model is not None:
        save_reward_model(directory / "reward_model.npz", learner.model, learner.rule)
        (directory / "utilization.txt").write_text(learner.stats.to_text())
        write_segment_records(directory / "pool.csv", learner.pool)
    (directory / "timing.json").write_text(json.dumps({"wall_clock_s": round(wall_clock, 3)}))


def read_metrics(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def run_experiment(cfg: ExperimentConfig, root=None) -> list:
    """Run every seed of ``cfg`` under ``<root>/<name>/seed_<k>/``."""
    cfg.validate()
    base = output_root(root) / cfg.name
    records = []
    for seed in cfg.seeds:
        log.info("%s: seed %d", cfg.name, seed)
        records.append(run_seed(cfg, int(seed), base / f"seed_{seed}"))
    return records


def summarize(values) -> dict:
    arr = np.asarray(values, dtype=np.float64)
    return {"mean": float(arr.mean()), "std": float(arr.std()), "n": int(arr.size)}


def return_ratio(shifted: float, unshifted: float) -> float:
    """shifted / unshifted for positive returns, extended to any sign as
    1 + (shifted - unshifted) / |unshifted| so that larger is always better."""
    if unshifted == 0:
        return math.inf if shifted > 0 else (1.0 if shifted == 0 else -math.inf)
    return 1.0 + (shifted - unshifted) / abs(unshifted)
