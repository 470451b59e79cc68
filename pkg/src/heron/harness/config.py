"""Experiment configuration: a nested YAML document mapped onto dataclasses.

Every key is optional; missing keys take the defaults below. Unknown keys
and bad values are rejected with the dotted name of the offending field.

Example::

    environment:
      name: traffic
      grid_rows: 1
      grid_cols: 1
    hierarchy: [q, wt, dl, em, fl, vl]
    margins: {multiplier: 0.5}
    pairs_per_round: 500
    reward: {source: heron, alpha: 1}
    engineered: {beta: 0.8}
    schedule: {base: 100, upsilon: 1.3}
    shift: {param: discharge_rate, value: 1, step: 3000}
    seeds: [0, 1, 2, 3, 4]
    eval: {period: 1000, episodes: 5}
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import yaml

from ..core import InvalidInputError
from ..envs import pendulum, traffic

ENVIRONMENTS = {
    "traffic": (traffic.SIGNAL_NAMES, traffic.SIGNAL_SENSES),
    "pendulum": (pendulum.SIGNAL_NAMES, pendulum.SIGNAL_SENSES),
}
SOURCES = ("heron", "heron-scaled", "engineered", "ground-truth", "ensemble", "oracle-rlhf")
ALPHAS = (1.0, 2.0, 3.0)

TRAFFIC_KEYS = ("grid_rows", "grid_cols", "arrival_rate", "discharge_rate",
                "segment_travel_steps", "phase_min_duration", "episode_length")
PENDULUM_KEYS = ("gravity", "mass", "length", "dt", "torque_limit", "max_speed",
                 "episode_length")


class ConfigError(InvalidInputError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class ShiftSpec:
    param: str
    value: float
    step: int


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "run"
    environment: str = "traffic"
    env_params: dict = field(default_factory=lambda: {"grid_rows": 1, "grid_cols": 1})
    hierarchy: tuple = ()
    margin_multiplier: float = 0.5
    pairs_per_round: int = 500
    segment_length: int = 16
    pool_size: int = 300
    reward_source: str = "heron"
    reward_alpha: float = 1.0
    reward_epochs: int = 20
    reward_hidden: tuple = (64, 64)
    engineered_beta: float = 0.8
    ensemble_mode: str = "uniform"
    ensemble_gamma: float = 0.5
    schedule_base: int = 100
    schedule_upsilon: float = 1.3
    policy_lr: float = 1e-3
    policy_gamma: float = 0.9
    policy_hidden: tuple = (64, 64)
    total_steps: int = 6000
    learning_starts: int = 1000
    shift: Optional[ShiftSpec] = None
    seeds: tuple = (0, 1, 2, 3, 4)
    eval_period: int = 1000
    eval_episodes: int = 5
    eval_seed: int = 999

    @property
    def signal_names(self) -> tuple:
        return ENVIRONMENTS[self.environment][0]

    @property
    def resolved_hierarchy(self) -> tuple:
        return tuple(self.hierarchy) or self.signal_names

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seeds=(int(seed),))

    def validate(self) -> "ExperimentConfig":
        if self.environment not in ENVIRONMENTS:
            raise ConfigError("environment.name",
                              f"unknown environment {self.environment!r}; "
                              f"choose from {sorted(ENVIRONMENTS)}")
        allowed = TRAFFIC_KEYS if self.environment == "traffic" else PENDULUM_KEYS
        for k in self.env_params:
            if k not in allowed:
                raise ConfigError(f"environment.{k}", f"not a {self.environment} parameter")
        try:
            make_env_config(self)
        except InvalidInputError as exc:
            raise ConfigError("environment", str(exc)) from None
        names = self.signal_names
        h = self.resolved_hierarchy
        for s in h:
            if s not in names:
                raise ConfigError("hierarchy", f"unknown signal {s!r}; "
                                               f"{self.environment} has {list(names)}")
        if len(set(h)) != len(h) or len(h) != len(names):
            raise ConfigError("hierarchy", f"must rank every signal exactly once: {list(names)}")
        if self.margin_multiplier < 0:
            raise ConfigError("margins.multiplier", "must be >= 0")
        _positive_int("pairs_per_round", self.pairs_per_round)
        _positive_int("segment_length", self.segment_length)
        if self.pool_size < 2:
            raise ConfigError("pool_size", "must be >= 2")
        if self.reward_source not in SOURCES:
            raise ConfigError("reward.source", f"unknown source {self.reward_source!r}; "
                                               f"choose from {list(SOURCES)}")
        if self.reward_alpha not in ALPHAS:
            raise ConfigError("reward.alpha", f"must be one of {list(ALPHAS)}")
        if self.reward_source == "heron-scaled" and self.reward_alpha == 1.0:
            raise ConfigError("reward.alpha", "heron-scaled needs alpha > 1")
        _positive_int("reward.epochs", self.reward_epochs)
        if not 0 < self.engineered_beta <= 1:
            raise ConfigError("engineered.beta", "must lie in (0, 1]")
        if self.ensemble_mode not in ("uniform", "geometric"):
            raise ConfigError("ensemble.mode", "must be uniform or geometric")
        if self.ensemble_gamma <= 0:
            raise ConfigError("ensemble.gamma", "must be > 0")
        _positive_int("schedule.base", self.schedule_base)
        if self.schedule_upsilon < 1:
            raise ConfigError("schedule.upsilon", "must be >= 1")
        if self.policy_lr <= 0:
            raise ConfigError("policy.lr", "must be > 0")
        if not 0 <= self.policy_gamma < 1:
            raise ConfigError("policy.gamma", "must lie in [0, 1)")
        _positive_int("policy.total_steps", self.total_steps)
        if not 0 <= self.learning_starts < self.total_steps:
            raise ConfigError("policy.learning_starts", "must lie in [0, total_steps)")
        if self.environment == "pendulum" and self.reward_source in ("ensemble",):
            raise ConfigError("reward.source", "ensemble needs a discrete-action environment")
        if self.shift is not None:
            if self.environment != "traffic" or self.shift.param not in ("discharge_rate",
                                                                        "arrival_rate"):
                raise ConfigError("shift.param", f"cannot shift {self.shift.param!r}")
            if not 0 <= self.shift.step <= self.total_steps:
                raise ConfigError("shift.step", "must lie in [0, total_steps]")
        if not self.seeds:
            raise ConfigError("seeds", "need at least one seed")
        _positive_int("eval.period", self.eval_period)
        _positive_int("eval.episodes", self.eval_episodes)
        return self


def _positive_int(name: str, value) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(name, f"must be a positive integer, got {value!r}")


def make_env_config(cfg: ExperimentConfig):
    if cfg.environment == "traffic":
        return traffic.TrafficConfig(**cfg.env_params)
    return pendulum.PendulumConfig(**cfg.env_params)


# (section, key) in the YAML document -> dataclass attribute
_LAYOUT = {
    ("margins", "multiplier"): "margin_multiplier",
    ("reward", "source"): "reward_source",
    ("reward", "alpha"): "reward_alpha",
    ("reward", "epochs"): "reward_epochs",
    ("reward", "hidden"): "reward_hidden",
    ("engineered", "beta"): "engineered_beta",
    ("ensemble", "mode"): "ensemble_mode",
    ("ensemble", "gamma"): "ensemble_gamma",
    ("schedule", "base"): "schedule_base",
    ("schedule", "upsilon"): "schedule_upsilon",
    ("policy", "lr"): "policy_lr",
    ("policy", "gamma"): "policy_gamma",
    ("policy", "hidden"): "policy_hidden",
    ("policy", "total_steps"): "total_steps",
    ("policy", "learning_starts"): "learning_starts",
    ("eval", "period"): "eval_period",
    ("eval", "episodes"): "eval_episodes",
    ("eval", "seed"): "eval_seed",
}
_TOP = ("name", "hierarchy", "pairs_per_round", "segment_length", "pool_size", "seeds")
_FLOATS = {"margin_multiplier", "reward_alpha", "engineered_beta", "ensemble_gamma",
           "schedule_upsilon", "policy_lr", "policy_gamma"}
_TUPLES = {"hierarchy", "reward_hidden", "policy_hidden", "seeds"}


def config_to_dict(cfg: ExperimentConfig) -> dict:
    out: dict = {"name": cfg.name,
                 "environment": {"name": cfg.environment, **dict(sorted(cfg.env_params.items()))}}
    for key in _TOP[1:]:
        v = getattr(cfg, key)
        out[key] = list(v) if key in _TUPLES else v
    for (section, key), attr in _LAYOUT.items():
        v = getattr(cfg, attr)
        out.setdefault(section, {})[key] = list(v) if attr in _TUPLES else v
    out["shift"] = None if cfg.shift is None else asdict(cfg.shift)
    return out


def config_from_dict(doc: Optional[dict]) -> ExperimentConfig:
    doc = dict(doc or {})
    kw: dict = {}
    env = doc.pop("environment", None)
    if env is not None:
        if isinstance(env, str):
            env = {"name": env}
        if not isinstance(env, dict):
            raise ConfigError("environment", "must be a mapping or a name")
        env = dict(env)
        kw["environment"] = env.pop("name", "traffic")
        kw["env_params"] = env
    for key in _TOP:
        if key in doc:
            kw[key] = doc.pop(key)
    sections = {s for s, _ in _LAYOUT}
    for section in sections:
        block = doc.pop(section, None)
        if block is None:
            continue
        if not isinstance(block, dict):
            raise ConfigError(section, "must be a mapping")
        for key, value in block.items():
            attr = _LAYOUT.get((section, key))
            if attr is None:
                raise ConfigError(f"{section}.{key}", "unknown key")
            kw[attr] = value
    if "shift" in doc:
        block = doc.pop("shift")
        if block is not None:
            missing = {"param", "value", "step"} - set(block)
            if missing:
                raise ConfigError(f"shift.{sorted(missing)[0]}", "required when shift is set")
            extra = set(block) - {"param", "value", "step"}
            if extra:
                raise ConfigError(f"shift.{sorted(extra)[0]}", "unknown key")
            kw["shift"] = ShiftSpec(str(block["param"]), float(block["value"]), int(block["step"]))
    if doc:
        raise ConfigError(sorted(doc)[0], "unknown key")
    for attr in list(kw):
        if attr in _TUPLES:
            v = kw[attr]
            if isinstance(v, (str, int)):
                v = [v]
            kw[attr] = tuple(v)
        elif attr in _FLOATS:
            try:
                kw[attr] = float(kw[attr])
            except (TypeError, ValueError):
                raise ConfigError(_dotted(attr), f"expected a number, got {kw[attr]!r}") from None
    try:
        cfg = ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None
    return cfg.validate()


def _dotted(attr: str) -> str:
    for (section, key), a in _LAYOUT.items():
        if a == attr:
            return f"{section}.{key}"
    return attr


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)


def parse_config(text: str) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"not valid YAML: {exc}") from None
    if doc is not None and not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a mapping")
    return config_from_dict(doc)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def save_config(path, cfg: ExperimentConfig) -> None:
    Path(path).write_text(dump_config(cfg))


CONFIG_FIELDS = tuple(f.name for f in fields(ExperimentConfig))
