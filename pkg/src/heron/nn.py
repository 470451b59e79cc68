"""A small fixed-topology MLP with hand-written reverse mode and Adam.

Everything runs in float64 so finite-difference checks are meaningful.
Inputs may be a single vector ``(d,)`` or a batch ``(B, d)``; for a batch,
parameter gradients are summed over rows.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import InvalidInputError, NumericError

PARAMS_FORMAT = "heron-mlp/1"


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple
    activation: str = "tanh"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2 or any(w < 1 for w in widths):
            raise InvalidInputError(f"invalid layer widths {widths}")
        if self.activation not in ("tanh", "relu"):
            raise InvalidInputError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def n_in(self) -> int:
        return self.layer_widths[0]

    @property
    def n_out(self) -> int:
        return self.layer_widths[-1]

    @property
    def num_params(self) -> int:
        w = self.layer_widths
        return sum(a * b + b for a, b in zip(w[:-1], w[1:]))


@dataclass
class MlpParams:
    spec: MlpSpec
    weights: list
    biases: list

    def arrays(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def zeros_like(self) -> "MlpParams":
        return MlpParams(self.spec, [np.zeros_like(w) for w in self.weights],
                         [np.zeros_like(b) for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    @classmethod
    def from_flat(cls, spec: MlpSpec, vec: np.ndarray) -> "MlpParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != spec.num_params:
            raise InvalidInputError(f"expected {spec.num_params} values, got {vec.size}")
        ws, bs, k = [], [], 0
        for a, b in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
            ws.append(vec[k:k + a * b].reshape(a, b).copy())
            k += a * b
            bs.append(vec[k:k + b].copy())
            k += b
        return cls(spec, ws, bs)

    def scale(self, c: float) -> "MlpParams":
        return MlpParams(self.spec, [w * c for w in self.weights], [b * c for b in self.biases])

    def add(self, other: "MlpParams") -> "MlpParams":
        return MlpParams(self.spec, [w + o for w, o in zip(self.weights, other.weights)],
                         [b + o for b, o in zip(self.biases, other.biases)])


def init_params(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    ws, bs = [], []
    for a, b in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        bound = 1.0 / np.sqrt(a)
        ws.append(rng.uniform(-bound, bound, size=(a, b)))
        bs.append(rng.uniform(-bound, bound, size=b))
    return MlpParams(spec, ws, bs)


def _as_batch(params: MlpParams, x) -> tuple:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.spec.n_in:
        raise InvalidInputError(f"input shape {x.shape} does not match width {params.spec.n_in}")
    return x, single


def forward_cached(params: MlpParams, x) -> tuple:
    x, single = _as_batch(params, x)
    relu = params.spec.activation == "relu"
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0) if relu else np.tanh(h)
        acts.append(h)
    return (h[0] if single else h), (acts, single)


def forward(params: MlpParams, x) -> np.ndarray:
    return forward_cached(params, x)[0]


def backward(params: MlpParams, x, upstream_grad, cache=None) -> tuple:
    """Reverse-mode gradients of ``upstream_grad . forward(params, x)``.

    Returns ``(param_grads, input_grad)``; ``param_grads`` is an
    :class:`MlpParams` holding gradients in place of values.
    """
    if cache is None:
        _, cache = forward_cached(params, x)
    acts, single = cache
    g = np.asarray(upstream_grad, dtype=np.float64)
    if single:
        g = g[None, :] if g.ndim == 1 else g
    if g.shape != acts[-1].shape:
        raise InvalidInputError(f"upstream grad shape {g.shape} != output shape {acts[-1].shape}")
    relu = params.spec.activation == "relu"
    n = len(params.weights)
    gw, gb = [None] * n, [None] * n
    for i in range(n - 1, -1, -1):
        if i < n - 1:
            a = acts[i + 1]
            g = g * (a > 0) if relu else g * (1.0 - a * a)
        gw[i] = acts[i].T @ g
        gb[i] = g.sum(axis=0)
        g = g @ params.weights[i].T
    return MlpParams(params.spec, gw, gb), (g[0] if single else g)


@dataclass
class AdamState:
    m: list
    v: list
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    clip_norm: Optional[float] = None

    @classmethod
    def for_params(cls, params: MlpParams, lr: float = 1e-3, **kw) -> "AdamState":
        arrs = params.arrays()
        return cls([np.zeros_like(a) for a in arrs], [np.zeros_like(a) for a in arrs], lr, **kw)


def optimizer_step(params: MlpParams, grads: MlpParams, state: AdamState) -> tuple:
    """One bias-corrected Adam update, applied in place; returns (params, state).

    A non-finite gradient raises :class:`NumericError` and leaves both
    untouched.
    """
    garrs = grads.arrays()
    if len(garrs) != len(state.m):
        raise InvalidInputError("gradient structure does not match optimizer state")
    for g in garrs:
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient; update rejected")
    if state.clip_norm is not None:
        norm = np.sqrt(sum(float(np.sum(g * g)) for g in garrs))
        if norm > state.clip_norm:
            garrs = [g * (state.clip_norm / norm) for g in garrs]
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for p, g, m, v in zip(params.arrays(), garrs, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


@dataclass
class GradCheckReport:
    max_rel_error: float
    passed: bool
    tolerance: float
    num_params: int
    worst_index: int = -1
    details: dict = field(default_factory=dict)


def rel_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-10) -> np.ndarray:
    """Elementwise |a - n| / max(|a|, |n|); entries where both are below
    ``floor`` are compared absolutely."""
    a, n = np.abs(analytic), np.abs(numeric)
    return np.abs(analytic - numeric) / np.maximum(np.maximum(a, n), floor)


def numeric_grad(loss_of_flat: Callable, theta: np.ndarray, h: float = 1e-5) -> np.ndarray:
    theta = theta.copy()
    out = np.empty_like(theta)
    for i in range(theta.size):
        old = theta[i]
        theta[i] = old + h
        lp = loss_of_flat(theta)
        theta[i] = old - h
        lm = loss_of_flat(theta)
        theta[i] = old
        out[i] = (lp - lm) / (2 * h)
    return out


def grad_check(spec: MlpSpec, loss_fn: Callable, tolerance: float = 1e-4,
               rng: Optional[np.random.Generator] = None, params: Optional[MlpParams] = None,
               h: float = 1e-5) -> GradCheckReport:
    """Compare analytic gradients against central differences.

    ``loss_fn(params) -> (loss, grads)``. Random parameters are drawn from
    ``rng`` unless ``params`` is given.
    """
    if params is None:
        params = init_params(spec, rng if rng is not None else np.random.default_rng(0))
    _, grads = loss_fn(params)
    analytic = grads.flat()
    numeric = numeric_grad(lambda th: loss_fn(MlpParams.from_flat(spec, th))[0], params.flat(), h)
    err = rel_error(analytic, numeric)
    worst = int(np.argmax(err))
    max_err = float(err[worst])
    return GradCheckReport(max_err, max_err <= tolerance, tolerance, spec.num_params, worst)


def save_params(path, params: MlpParams, meta: Optional[dict] = None) -> None:
    header = {"format": PARAMS_FORMAT, "layer_widths": list(params.spec.layer_widths),
              "activation": params.spec.activation, "meta": meta or {}}
    arrays = {f"a{i}": a for i, a in enumerate(params.arrays())}
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_params(path) -> tuple:
    """Returns ``(params, meta)``."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format") != PARAMS_FORMAT:
            raise InvalidInputError(f"{path}: unsupported format {header.get('format')!r}")
        spec = MlpSpec(tuple(header["layer_widths"]), header["activation"])
        arrs = [data[f"a{i}"] for i in range(2 * (len(spec.layer_widths) - 1))]
    params = MlpParams(spec, arrs[0::2], arrs[1::2])
    for w, (a, b) in zip(params.weights, zip(spec.layer_widths[:-1], spec.layer_widths[1:])):
        if w.shape != (a, b):
            raise InvalidInputError(f"{path}: weight shape {w.shape} != {(a, b)}")
    return params, header["meta"]
