"""Direct preference optimisation for a softmax contextual-bandit policy.

The policy maps a one-hot context through an MLP to arm logits. With no
hidden layer this is exactly a per-(context, arm) logit table.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..core import InvalidInputError
from ..nn import AdamState, MlpParams, MlpSpec, backward, forward, forward_cached, init_params, optimizer_step


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max(axis=-1, keepdims=True)
    return logits - m - np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))


@dataclass
class SoftmaxBanditPolicy:
    net: MlpParams
    ref_net: MlpParams
    num_contexts: int
    num_arms: int

    def onehot(self, contexts) -> np.ndarray:
        contexts = np.asarray(contexts, dtype=np.int64).reshape(-1)
        x = np.zeros((contexts.shape[0], self.num_contexts))
        x[np.arange(contexts.shape[0]), contexts] = 1.0
        return x

    def log_probs(self, contexts, reference: bool = False) -> np.ndarray:
        net = self.ref_net if reference else self.net
        return _log_softmax(forward(net, self.onehot(contexts)))

    def probs(self, contexts) -> np.ndarray:
        return np.exp(self.log_probs(contexts))

    def freeze_reference(self) -> None:
        self.ref_net = self.net.copy()


def make_bandit_policy(num_contexts: int, num_arms: int, hidden: Sequence[int] = (),
                       rng=None, zero_init: bool = True) -> SoftmaxBanditPolicy:
    spec = MlpSpec((num_contexts, *hidden, num_arms), "tanh")
    net = init_params(spec, rng if rng is not None else np.random.default_rng(0))
    if zero_init and not hidden:
        net.weights[0][:] = 0.0
        net.biases[0][:] = 0.0
    return SoftmaxBanditPolicy(net, net.copy(), num_contexts, num_arms)


def dpo_loss(policy: SoftmaxBanditPolicy, params: MlpParams, contexts, preferred, rejected,
             beta: float) -> tuple:
    """Mean -log sigmoid(beta * implicit-reward gap) at ``params``, with gradients.

    The implicit reward of arm ``a`` in context ``x`` is
    ``log pi(a|x) - log pi_ref(a|x)``.
    """
    contexts = np.asarray(contexts, dtype=np.int64).reshape(-1)
    w = np.asarray(preferred, dtype=np.int64).reshape(-1)
    l = np.asarray(rejected, dtype=np.int64).reshape(-1)
    if contexts.size == 0:
        raise InvalidInputError("empty preference set")
    if beta <= 0:
        raise InvalidInputError("beta must be positive")
    x = policy.onehot(contexts)
    logits, cache = forward_cached(params, x)
    lp = _log_softmax(logits)
    ref = _log_softmax(forward(policy.ref_net, x))
    rows = np.arange(contexts.size)
    gap = beta * ((lp[rows, w] - ref[rows, w]) - (lp[rows, l] - ref[rows, l]))
    loss = float(np.mean(np.logaddexp(0.0, -gap)))
    dgap = -0.5 * (1.0 - np.tanh(0.5 * gap)) / contexts.size
    # d gap / d logits = beta * (e_w - e_l); the softmax normaliser cancels
    up = np.zeros_like(logits)
    np.add.at(up, (rows, w), beta * dgap)
    np.add.at(up, (rows, l), -beta * dgap)
    grads, _ = backward(params, x, up, cache)
    return loss, grads


def dpo_update(policy: SoftmaxBanditPolicy, contexts, preferred, rejected, beta: float,
               opt: AdamState) -> float:
    """One optimiser step on the DPO loss; returns the pre-update loss."""
    loss, grads = dpo_loss(policy, policy.net, contexts, preferred, rejected, beta)
    optimizer_step(policy.net, grads, opt)
    return loss


def train_dpo(policy: SoftmaxBanditPolicy, contexts, preferred, rejected, beta: float = 1.0,
              lr: float = 0.05, updates: int = 2000, batch_size: Optional[int] = None,
              rng=None, stop_prob: Optional[float] = None) -> dict:
    """Run up to ``updates`` DPO steps; optionally stop once every context puts
    at least ``stop_prob`` on its preferred arm."""
    rng = rng if rng is not None else np.random.default_rng(0)
    contexts = np.asarray(contexts)
    preferred = np.asarray(preferred)
    rejected = np.asarray(rejected)
    opt = AdamState.for_params(policy.net, lr)
    losses = []
    n = contexts.size
    for k in range(updates):
        if batch_size is None or batch_size >= n:
            idx = np.arange(n)
        else:
            idx = rng.integers(0, n, size=batch_size)
        losses.append(dpo_update(policy, contexts[idx], preferred[idx], rejected[idx], beta, opt))
        if stop_prob is not None:
            p = policy.probs(contexts)[np.arange(n), preferred]
            if p.min() >= stop_prob:
                return {"updates": k + 1, "losses": losses}
    return {"updates": updates, "losses": losses}
