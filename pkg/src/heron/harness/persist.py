"""Policy files: one MLP tensor dump per agent (per ensemble member for
Q-learning ensembles) whose header records the agent type."""
from __future__ import annotations

import re
from pathlib import Path
from typing import Callable

import numpy as np

from ..core import InvalidInputError
from ..nn import forward, load_params, save_params
from ..policy import combine_action_values

_NAME = re.compile(r"agent(\d+)_member(\d+)\.npz$")


def save_policy(directory, result, kind: str, environment: str) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if kind == "q":
        for i, ctrl in enumerate(result.controllers):
            for k, member in enumerate(ctrl.members):
                meta = {"agent_type": "q", "environment": environment, "mode": ctrl.mode,
                        "gamma_w": ctrl.gamma_w}
                save_params(directory / f"agent{i}_member{k}.npz", member.q_net, meta)
    elif kind == "pg":
        agent = result.agent
        meta = {"agent_type": "pg", "environment": environment,
                "noise_scale": agent.noise_scale}
        save_params(directory / "agent0_member0.npz", agent.policy_net, meta)
    else:
        raise InvalidInputError(f"unknown policy kind {kind!r}")


def load_policy(directory) -> tuple:
    """Returns ``(policy, meta)``; ``policy(obs)`` maps the per-agent
    observation matrix to one greedy / noise-free action per agent."""
    directory = Path(directory)
    files = sorted(directory.glob("agent*_member*.npz"))
    if not files:
        raise InvalidInputError(f"{directory}: no policy files")
    agents: dict = {}
    meta = None
    for f in files:
        m = _NAME.search(f.name)
        net, meta_f = load_params(f)
        if meta_f.get("agent_type") not in ("q", "pg"):
            raise InvalidInputError(f"{f}: not a policy file")
        agents.setdefault(int(m.group(1)), {})[int(m.group(2))] = net
        meta = meta_f
    nets = [[agents[i][k] for k in sorted(agents[i])] for i in sorted(agents)]
    if meta["agent_type"] == "pg":
        net = nets[0][0]
        return (lambda obs: forward(net, obs)), meta
    mode = meta.get("mode", "single")
    gamma_w = meta.get("gamma_w", 1.0)

    def policy(obs):
        acts = []
        for i, members in enumerate(nets):
            if len(members) == 1:
                acts.append(int(np.argmax(forward(members[0], obs[i]))))
            else:
                values = np.stack([forward(n, obs[i]) for n in members])
                acts.append(int(np.argmax(combine_action_values(values, mode, gamma_w))))
        return np.array(acts)

    return policy, meta
