"""Preference-trained reward models and the reward-side schedules."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .core import (InsufficientDataError, InvalidInputError, MarginSet, PreferenceLabel,
                   PreferencePair, SignalHierarchy, TrajectorySegment)
from .elicit import PreferenceDataset, elicit_preference
from .nn import (AdamState, MlpParams, MlpSpec, backward, forward, forward_cached, init_params,
                 load_params, optimizer_step, save_params)


@dataclass
class RewardModel:
    """Per-step reward R(s, a) as an MLP over ``[state, action_encoding]``.

    Discrete actions are one-hot encoded over ``action_dim`` entries;
    continuous actions are appended as-is.
    """

    net: MlpParams
    state_dim: int
    action_dim: int
    discrete: bool = True
    gamma: float = 1.0

    def __post_init__(self):
        if self.net.spec.n_out != 1:
            raise InvalidInputError("reward network must have a scalar output")
        if self.net.spec.n_in != self.state_dim + self.action_dim:
            raise InvalidInputError("reward network input width != state_dim + action_dim")
        if not 0.0 <= self.gamma <= 1.0:
            raise InvalidInputError("gamma must lie in [0, 1]")

    def encode(self, states, actions) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        if states.ndim == 1:
            states = states[None, :]
        if states.shape[1] != self.state_dim:
            raise InvalidInputError(f"state width {states.shape[1]} != {self.state_dim}")
        actions = np.asarray(actions)
        if self.discrete:
            actions = actions.reshape(-1).astype(np.int64)
            if np.any(actions < 0) or np.any(actions >= self.action_dim):
                raise InvalidInputError("discrete action out of range")
            enc = np.zeros((actions.shape[0], self.action_dim))
            enc[np.arange(actions.shape[0]), actions] = 1.0
        else:
            enc = actions.reshape(states.shape[0], -1).astype(np.float64)
            if enc.shape[1] != self.action_dim:
                raise InvalidInputError(f"action width {enc.shape[1]} != {self.action_dim}")
        if enc.shape[0] != states.shape[0]:
            raise InvalidInputError("states and actions differ in length")
        return np.concatenate([states, enc], axis=1)

    def step_rewards(self, states, actions) -> np.ndarray:
        return forward(self.net, self.encode(states, actions))[:, 0]

    def copy(self) -> "RewardModel":
        return replace(self, net=self.net.copy())


def make_reward_model(state_dim: int, action_dim: int, discrete: bool = True,
                      hidden: Sequence[int] = (64, 64), activation: str = "tanh",
                      gamma: float = 1.0, rng: Optional[np.random.Generator] = None,
                      zero_output: bool = False) -> RewardModel:
    spec = MlpSpec((state_dim + action_dim, *hidden, 1), activation)
    net = init_params(spec, rng if rng is not None else np.random.default_rng(0))
    if zero_output:
        net.weights[-1][:] = 0.0
        net.biases[-1][:] = 0.0
    return RewardModel(net, state_dim, action_dim, discrete, gamma)


def segment_reward(model: RewardModel, segment: TrajectorySegment) -> float:
    """Discounted sum of per-step rewards, exponent counted from 0 in the segment."""
    r = model.step_rewards(segment.states, segment.actions)
    return float(np.dot(model.gamma ** np.arange(len(r)), r))


def _stack(model: RewardModel, segments: Sequence[TrajectorySegment]) -> tuple:
    lengths = np.array([len(s) for s in segments])
    x = model.encode(np.concatenate([s.states for s in segments]),
                     np.concatenate([s.actions for s in segments]))
    ids = np.repeat(np.arange(len(segments)), lengths)
    starts = np.concatenate([[0], np.cumsum(lengths)[:-1]])
    t = np.arange(lengths.sum()) - np.repeat(starts, lengths)
    disc = model.gamma ** t
    return x, ids, disc


def segment_rewards(model: RewardModel, segments: Sequence[TrajectorySegment]) -> np.ndarray:
    x, ids, disc = _stack(model, segments)
    r = forward(model.net, x)[:, 0]
    return np.bincount(ids, weights=r * disc, minlength=len(segments))


def bt_loss(model: RewardModel, batch: Sequence[PreferencePair]) -> tuple:
    """Mean of -log sigmoid(R(winner) - R(loser)) and its parameter gradients."""
    if len(batch) == 0:
        raise InvalidInputError("empty preference batch")
    p = len(batch)
    segs = [pr.winner for pr in batch] + [pr.loser for pr in batch]
    x, ids, disc = _stack(model, segs)
    out, cache = forward_cached(model.net, x)
    scores = np.bincount(ids, weights=out[:, 0] * disc, minlength=2 * p)
    gap = scores[:p] - scores[p:]
    loss = float(np.mean(np.logaddexp(0.0, -gap)))
    # d/dgap softplus(-gap) = -sigmoid(-gap)
    dgap = -0.5 * (1.0 - np.tanh(0.5 * gap)) / p
    dscore = np.concatenate([dgap, -dgap])
    upstream = (dscore[ids] * disc)[:, None]
    grads, _ = backward(model.net, x, upstream, cache)
    return loss, grads


def pairwise_accuracy(model: RewardModel, pairs: Sequence[PreferencePair]) -> float:
    """Fraction of pairs ranked correctly; exact score ties count one half."""
    if len(pairs) == 0:
        return 0.5
    p = len(pairs)
    s = segment_rewards(model, [pr.winner for pr in pairs] + [pr.loser for pr in pairs])
    gap = s[:p] - s[p:]
    return float(np.mean((gap > 0) + 0.5 * (gap == 0)))


@dataclass
class RewardTrainConfig:
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    holdout_fraction: float = 0.1
    hidden: tuple = (64, 64)
    activation: str = "tanh"
    gamma: float = 1.0
    num_actions: Optional[int] = None
    clip_norm: Optional[float] = 10.0
    seed: int = 0


def train_reward_model(dataset: PreferenceDataset, config: Optional[RewardTrainConfig] = None,
                       model: Optional[RewardModel] = None,
                       rng: Optional[np.random.Generator] = None) -> tuple:
    """Fit the reward model on the dataset; returns ``(model, holdout_accuracy)``.

    ``model`` warm-starts training (it is copied, not mutated). A dataset
    whose segments are indistinguishable yields accuracy 0.5 through the
    tie convention of :func:`pairwise_accuracy`.
    """
    config = config or RewardTrainConfig()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    pairs = list(dataset.pairs)
    if len(pairs) < 2:
        raise InsufficientDataError(f"need at least 2 preference pairs, got {len(pairs)}")
    first = pairs[0].winner
    if model is None:
        if first.discrete:
            n_act = config.num_actions
            if n_act is None:
                n_act = int(max(max(p.winner.actions.max(), p.loser.actions.max()) for p in pairs)) + 1
            adim = n_act
        else:
            adim = first.actions.shape[1]
        model = make_reward_model(first.state_dim, adim, first.discrete, config.hidden,
                                  config.activation, config.gamma, rng)
    else:
        model = model.copy()

    perm = rng.permutation(len(pairs))
    n_hold = 0
    if config.holdout_fraction > 0:
        n_hold = min(len(pairs) - 1, max(1, int(round(config.holdout_fraction * len(pairs)))))
    hold = [pairs[i] for i in perm[:n_hold]]
    train = [pairs[i] for i in perm[n_hold:]]

    opt = AdamState.for_params(model.net, config.lr, clip_norm=config.clip_norm)
    bs = max(1, config.batch_size)
    for _ in range(config.epochs):
        order = rng.permutation(len(train))
        for lo in range(0, len(train), bs):
            batch = [train[i] for i in order[lo:lo + bs]]
            _, grads = bt_loss(model, batch)
            optimizer_step(model.net, grads, opt)
    acc = pairwise_accuracy(model, hold if hold else train)
    return model, acc


def avg_win_level(segment: TrajectorySegment, reference: Sequence[TrajectorySegment],
                  hierarchy: SignalHierarchy, margins: MarginSet) -> float:
    """Mean decision level over the comparisons ``segment`` wins; 0 if none."""
    levels = []
    for ref in reference:
        label, level = elicit_preference(segment, ref, hierarchy, margins)
        if label == PreferenceLabel.FIRST:
            levels.append(level)
    return float(np.mean(levels)) if levels else 0.0


@dataclass(frozen=True)
class ScalingRule:
    alpha: float = 1.0
    reference_set_size: int = 16

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 1:
            raise InvalidInputError("alpha must be finite and >= 1")
        if self.reference_set_size < 1:
            raise InvalidInputError("reference_set_size must be positive")


def scale_reward(raw, F, rule: ScalingRule):
    """``raw * alpha ** F``; works elementwise on arrays."""
    if np.any(np.asarray(F) < 0):
        raise InvalidInputError("F must be non-negative")
    return raw * rule.alpha ** F


@dataclass(frozen=True)
class AnnealedSchedule:
    """Retrain at cumulative thresholds of round(base * upsilon**t).

    ``upsilon == 1`` gives a plain linear schedule (every ``base`` steps).
    """

    base: int = 100
    upsilon: float = 1.3
    round: int = 0
    next_threshold: Optional[int] = None
    last_step: int = -1

    def __post_init__(self):
        if self.base < 1:
            raise InvalidInputError("schedule base must be positive")
        if not self.upsilon >= 1.0:
            raise InvalidInputError("upsilon must be >= 1")
        if self.next_threshold is None:
            object.__setattr__(self, "next_threshold", self.interval(0))

    def interval(self, t: int) -> int:
        return int(math.floor(self.base * self.upsilon ** t + 0.5))

    def thresholds(self, count: int) -> list:
        out, acc = [], 0
        for t in range(count):
            acc += self.interval(t)
            out.append(acc)
        return out


def schedule_next(schedule: AnnealedSchedule, current_step: int) -> tuple:
    """Returns ``(should_retrain, updated_schedule)``.

    Fires once when ``current_step`` reaches the pending threshold; if the
    step skipped several thresholds they are consumed together.
    """
    if current_step < schedule.last_step:
        raise InvalidInputError(
            f"step went backwards: {current_step} < {schedule.last_step}")
    if current_step < schedule.next_threshold:
        return False, replace(schedule, last_step=current_step)
    rnd, thr = schedule.round, schedule.next_threshold
    while thr <= current_step:
        rnd += 1
        thr += schedule.interval(rnd)
    return True, replace(schedule, round=rnd, next_threshold=thr, last_step=current_step)


@dataclass
class Standardizer:
    mean: float = 0.0
    std: float = 1.0

    def __call__(self, r):
        return (r - self.mean) / self.std


def fit_standardizer(model: RewardModel, segments: Sequence[TrajectorySegment]) -> Standardizer:
    """Mean/std of per-step learned rewards over the states in ``segments``."""
    r = model.step_rewards(np.concatenate([s.states for s in segments]),
                           np.concatenate([s.actions for s in segments]))
    return Standardizer(float(r.mean()), float(max(r.std(), 1e-8)))


def save_reward_model(path, model: RewardModel, rule: Optional[ScalingRule] = None) -> None:
    meta = {"kind": "reward", "gamma": model.gamma, "state_dim": model.state_dim,
            "action_dim": model.action_dim, "discrete": model.discrete}
    if rule is not None:
        meta["alpha"] = rule.alpha
        meta["reference_set_size"] = rule.reference_set_size
    save_params(path, model.net, meta)


def load_reward_model(path) -> tuple:
    net, meta = load_params(path)
    if meta.get("kind") != "reward":
        raise InvalidInputError(f"{path}: not a reward model")
    rule = None
    if "alpha" in meta:
        rule = ScalingRule(meta["alpha"], meta["reference_set_size"])
    return RewardModel(net, meta["state_dim"], meta["action_dim"], meta["discrete"],
                       meta["gamma"]), rule
