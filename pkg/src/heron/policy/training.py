"""Training drivers: reward sources, the HERON reward learner and the
Q-learning / policy-gradient loops that consume them."""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..core import (InvalidInputError, SignalHierarchy, TrajectorySegment, compute_margins)
from ..elicit import (UtilizationStats, build_oracle_dataset, build_preference_dataset,
                      utilization_fractions)
from ..reward import (AnnealedSchedule, RewardTrainConfig, ScalingRule, Standardizer,
                      avg_win_level, fit_standardizer, make_reward_model, scale_reward,
                      schedule_next, train_reward_model)
from .baselines import EngineeredReward, combine_action_values, engineered_reward
from .pg import make_pg_agent, mean_baseline_advantages, pg_update
from .qlearn import QAgent, QConfig, linear_epsilon, make_q_agent, q_update

log = logging.getLogger(__name__)


# -- reward sources -----------------------------------------------------------
# A reward source maps a transition batch (dict of column arrays, see
# ReplayBuffer.take) to per-row rewards.

class GroundTruthSource:
    def __init__(self, scale: float = 1.0):
        self.scale = scale

    def __call__(self, batch) -> np.ndarray:
        return batch["gt"] * self.scale


class EngineeredSource:
    def __init__(self, er: EngineeredReward):
        self.er = er

    def __call__(self, batch) -> np.ndarray:
        return engineered_reward(batch["signals"], self.er)


class SignalSource:
    """One normalised, sense-adjusted signal; used by ensemble members."""

    def __init__(self, index: int, sense: float, mean: float, std: float):
        self.index, self.sense, self.mean, self.std = index, sense, mean, max(std, 1e-8)

    def __call__(self, batch) -> np.ndarray:
        return self.sense * (batch["signals"][:, self.index] - self.mean) / self.std


@dataclass
class HeronConfig:
    segment_length: int = 16
    pairs_per_round: int = 500
    margin_multiplier: float = 1.0
    pool_size: int = 300
    schedule_base: int = 100
    schedule_upsilon: float = 1.3
    reward: RewardTrainConfig = field(default_factory=lambda: RewardTrainConfig(epochs=20))
    warm_epochs: int = 8
    standardize: bool = True
    alpha: float = 1.0
    reference_set_size: int = 16
    oracle: bool = False


class HeronRewardLearner:
    """Owns the segment pool, the reward model and its retraining schedule.

    With ``config.oracle`` the pairs are labelled by ground-truth return
    instead of the hierarchy (the simulated-RLHF baseline).
    """

    def __init__(self, hierarchy: SignalHierarchy, config: HeronConfig, obs_dim: int,
                 action_dim: int, discrete: bool, rng: np.random.Generator):
        self.hierarchy = hierarchy
        self.config = config
        self.obs_dim, self.action_dim, self.discrete = obs_dim, action_dim, discrete
        self.rng = rng
        self.pool: deque = deque(maxlen=config.pool_size)
        self.schedule = AnnealedSchedule(config.schedule_base, config.schedule_upsilon)
        self.rule = ScalingRule(config.alpha, config.reference_set_size)
        self.model = None
        self.margins = None
        self.standardizer = Standardizer()
        self.history: list = []
        self.stats = UtilizationStats.empty(1 if config.oracle else len(hierarchy))
        self._next_id = 0

    @property
    def ready(self) -> bool:
        return self.model is not None

    def add_segment(self, seg: TrajectorySegment) -> TrajectorySegment:
        if seg.segment_id < 0:
            seg = TrajectorySegment(seg.states, seg.actions, seg.signals, seg.rewards, self._next_id)
        self._next_id += 1
        self.pool.append(seg)
        return seg

    def maybe_retrain(self, step: int) -> bool:
        fire, self.schedule = schedule_next(self.schedule, step)
        if fire and len(self.pool) >= 2:
            self.retrain(step)
            return True
        return False

    def retrain(self, step: int = 0) -> dict:
        pool = list(self.pool)
        cfg = self.config
        # margins are recomputed from the current pool every round
        self.margins = compute_margins(pool, self.hierarchy, cfg.margin_multiplier)
        if cfg.oracle:
            data = build_oracle_dataset(pool, cfg.pairs_per_round, self.rng)
        else:
            data = build_preference_dataset(pool, self.hierarchy, self.margins,
                                            cfg.pairs_per_round, self.rng)
        self.stats = self.stats.merge(data.stats)
        entry = {"step": step, "pool": len(pool), "pairs": len(data),
                 "utilization": utilization_fractions(data.stats),
                 "margins": list(self.margins.deltas), "accuracy": None}
        if len(data) >= 2:
            rcfg = cfg.reward
            if self.model is None:
                self.model = make_reward_model(self.obs_dim, self.action_dim, self.discrete,
                                               rcfg.hidden, rcfg.activation, rcfg.gamma, self.rng)
            else:
                rcfg = RewardTrainConfig(**{**rcfg.__dict__, "epochs": cfg.warm_epochs})
            self.model, acc = train_reward_model(data, rcfg, self.model, self.rng)
            entry["accuracy"] = acc
            if cfg.standardize:
                self.standardizer = fit_standardizer(self.model, pool)
        self.history.append(entry)
        log.debug("reward round at step %d: %s", step, entry)
        return entry

    def win_level(self, seg: TrajectorySegment) -> float:
        if self.margins is None or len(self.pool) < 1:
            return 0.0
        k = min(self.rule.reference_set_size, len(self.pool))
        idx = self.rng.choice(len(self.pool), size=k, replace=False)
        ref = [self.pool[i] for i in idx]
        return avg_win_level(seg, ref, self.hierarchy, self.margins)

    def step_rewards(self, obs, act, win_level=None) -> np.ndarray:
        r = self.standardizer(self.model.step_rewards(obs, act))
        if self.rule.alpha != 1.0 and win_level is not None:
            r = scale_reward(r, np.asarray(win_level), self.rule)
        return r

    def __call__(self, batch) -> np.ndarray:
        return self.step_rewards(batch["obs"], batch["act"], batch.get("win_level"))


# -- Q-learning driver ----------------------------------------------------------

class QController:
    """Action selection and learning for one intersection.

    A single member is plain Q-learning; several members with per-signal
    reward sources form the ensemble baseline.
    """

    def __init__(self, members: Sequence[QAgent], sources: Sequence[Callable],
                 mode: str = "single", gamma_w: float = 1.0):
        self.members = list(members)
        self.sources = list(sources)
        self.mode = mode
        self.gamma_w = gamma_w

    def greedy(self, obs) -> int:
        if len(self.members) == 1:
            return self.members[0].greedy(obs)
        values = np.stack([m.q_values(obs) for m in self.members])
        return int(np.argmax(combine_action_values(values, self.mode, self.gamma_w)))

    def act(self, obs, rng, eps: float) -> int:
        if eps > 0 and rng.random() < eps:
            return int(rng.integers(0, self.members[0].num_actions))
        return self.greedy(obs)

    def store(self, *row) -> list:
        return [m.buffer.add(*row) for m in self.members]

    def update(self, rng, batch_size: int) -> float:
        loss = 0.0
        for m, src in zip(self.members, self.sources):
            loss += q_update(m, m.buffer.sample(batch_size, rng), src)
        return loss


@dataclass
class TrainResult:
    controllers: list
    learner: Optional[HeronRewardLearner]
    metrics: list
    losses: list = field(default_factory=list)

    def policy(self) -> Callable:
        ctrls = self.controllers
        return lambda obs: np.array([c.greedy(obs[i]) for i, c in enumerate(ctrls)])


def collect_random_signals(env, steps: int, rng) -> np.ndarray:
    """Signals from a uniformly random policy; used to fit baseline normalisers."""
    env.reset()
    out = []
    for _ in range(steps):
        acts = rng.integers(0, env.num_actions, size=env.num_agents)
        _, z, _, done, _ = env.step(acts)
        out.append(z)
        if done:
            env.reset()
    return np.concatenate(out)


def train_q(env, source: str, hierarchy: SignalHierarchy, total_steps: int,
            rng: np.random.Generator, qcfg: Optional[QConfig] = None,
            heron: Optional[HeronConfig] = None, beta: float = 0.5,
            ensemble_mode: str = "uniform", ensemble_gamma: float = 1.0,
            learning_starts: int = 500, gt_scale: float = 1.0,
            eval_every: Optional[int] = None, eval_fn: Optional[Callable] = None) -> TrainResult:
    """Train independent per-intersection Q-learners on the chosen reward source.

    ``source`` is one of ``heron``, ``oracle-rlhf``, ``engineered``,
    ``ground-truth``, ``ensemble``. The first ``learning_starts`` steps act
    uniformly at random; under HERON no update happens before the first
    reward model exists. ``eval_fn(result, step)`` is called every
    ``eval_every`` steps and its return value appended to ``metrics``.
    """
    qcfg = qcfg or QConfig()
    n_sig = len(hierarchy)
    learner = None
    if source in ("heron", "oracle-rlhf"):
        hcfg = heron or HeronConfig()
        if source == "oracle-rlhf":
            hcfg = HeronConfig(**{**hcfg.__dict__, "oracle": True})
        learner = HeronRewardLearner(hierarchy, hcfg, env.obs_dim, env.num_actions, True, rng)
        sources = [learner]
    elif source == "engineered":
        er = EngineeredReward(beta, hierarchy).fit(
            collect_random_signals(env, max(learning_starts, 200), rng))
        sources = [EngineeredSource(er)]
    elif source == "ground-truth":
        sources = [GroundTruthSource(gt_scale)]
    elif source == "ensemble":
        z = collect_random_signals(env, max(learning_starts, 200), rng)
        mu, sd = z.mean(axis=0), z.std(axis=0)
        sources = [SignalSource(i, hierarchy.senses[i], mu[i], sd[i]) for i in hierarchy.order]
    else:
        raise InvalidInputError(f"reward.source: unknown source {source!r}")

    controllers = []
    for _ in range(env.num_agents):
        members = [make_q_agent(env.obs_dim, env.num_actions, n_sig, qcfg, rng) for _ in sources]
        mode = ensemble_mode if source == "ensemble" else "single"
        controllers.append(QController(members, sources, mode, ensemble_gamma))

    result = TrainResult(controllers, learner, [])
    seg_len = learner.config.segment_length if learner is not None else 0
    traj = [_TrajRecorder() for _ in range(env.num_agents)]
    scaled = learner is not None and learner.rule.alpha != 1.0

    obs = env.reset()
    for step in range(total_steps):
        eps = 1.0 if step < learning_starts else linear_epsilon(step - learning_starts,
                                                                total_steps - learning_starts, qcfg)
        acts = np.array([c.act(obs[i], rng, eps) for i, c in enumerate(controllers)])
        nxt, z, gt, done, _ = env.step(acts)
        for i, c in enumerate(controllers):
            idx = c.store(obs[i], acts[i], nxt[i], False, z[i], gt[i])
            if learner is not None:
                traj[i].add(obs[i], acts[i], z[i], gt[i], idx)
                if len(traj[i]) == seg_len:
                    seg = learner.add_segment(traj[i].segment())
                    if scaled:
                        F = learner.win_level(seg)
                        for m, rows in zip(c.members, zip(*traj[i].indices)):
                            m.buffer.win_level[list(rows)] = F
                    traj[i].clear()
        obs = nxt
        if done:
            obs = env.reset()
            for tr in traj:
                tr.clear()
        if learner is not None:
            learner.maybe_retrain(step + 1)
        can_learn = step >= learning_starts and (learner is None or learner.ready)
        if can_learn:
            result.losses.append(sum(c.update(rng, qcfg.batch_size) for c in controllers))
        if eval_every and eval_fn is not None and (step + 1) % eval_every == 0:
            result.metrics.append(eval_fn(result, step + 1))
    return result


class _TrajRecorder:
    def __init__(self):
        self.clear()

    def clear(self) -> None:
        self.obs, self.act, self.sig, self.gt, self.indices = [], [], [], [], []

    def __len__(self) -> int:
        return len(self.act)

    def add(self, o, a, z, r, idx) -> None:
        self.obs.append(o)
        self.act.append(a)
        self.sig.append(z)
        self.gt.append(r)
        self.indices.append(idx)

    def segment(self) -> TrajectorySegment:
        return TrajectorySegment(np.array(self.obs), np.array(self.act), np.array(self.sig),
                                 np.array(self.gt))


# -- policy-gradient driver (continuous control) ------------------------------------

def train_pg(env, source: str, hierarchy: SignalHierarchy, episodes: int,
             rng: np.random.Generator, heron: Optional[HeronConfig] = None,
             beta: float = 0.5, hidden=(64, 64), lr: float = 1e-3, noise_scale: float = 0.5,
             gamma: float = 0.99, eval_every: Optional[int] = None,
             eval_fn: Optional[Callable] = None) -> TrainResult:
    """Episodic policy gradient on a single-agent continuous env.

    Under HERON each full episode is one segment; the reward model is
    retrained on the annealed schedule counted in environment steps.
    """
    agent = make_pg_agent(env.obs_dim, env.action_dim, hidden, lr, noise_scale, rng)
    learner = None
    er = None
    if source in ("heron", "oracle-rlhf"):
        hcfg = heron or HeronConfig(schedule_base=400, schedule_upsilon=1.0, pairs_per_round=200)
        if source == "oracle-rlhf":
            hcfg = HeronConfig(**{**hcfg.__dict__, "oracle": True})
        learner = HeronRewardLearner(hierarchy, hcfg, env.obs_dim, env.action_dim, False, rng)
    elif source == "engineered":
        er = EngineeredReward(beta, hierarchy)
    elif source != "ground-truth":
        raise InvalidInputError(f"reward.source: {source!r} is not supported for policy gradient")

    class _Ctrl:
        def greedy(self, o):
            return agent.mean(o)

    result = TrainResult([_Ctrl()], learner, [])
    result.agent = agent
    warm = []
    steps = 0
    for ep in range(episodes):
        obs = env.reset()
        S, A, Z, R = [], [], [], []
        done = False
        while not done:
            a = agent.act(obs[0], rng)
            nxt, z, r, done, _ = env.step(a)
            S.append(obs[0])
            A.append(a)
            Z.append(z[0])
            R.append(r[0])
            obs = nxt
            steps += 1
        S, A, Z, R = map(np.array, (S, A, Z, R))
        if learner is not None:
            learner.add_segment(TrajectorySegment(S, A, Z, R))
            learner.maybe_retrain(steps)
            if not learner.ready:
                continue
            rewards = learner.step_rewards(S, A)
        elif er is not None:
            if er.mean is None:
                warm.append(Z)
                if len(warm) < 5:
                    continue
                er.fit(np.concatenate(warm))
            rewards = engineered_reward(Z, er)
        else:
            rewards = R
        pg_update(agent, S, A, mean_baseline_advantages(rewards, gamma))
        if eval_every and eval_fn is not None and (ep + 1) % eval_every == 0:
            result.metrics.append(eval_fn(result, steps))
    return result
