"""Feed-forward network, binary cross-entropy backprop and the Adam update."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PROB_CLAMP = 1e-7


def sigmoid(z):
    # split by sign so exp never overflows
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Mlp:
    """ReLU hidden layers and a single sigmoid output unit.

    ``weights[i]`` has shape ``(dims[i], dims[i+1])``.
    """

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray]):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias per weight matrix")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise ValueError("layer shapes do not chain")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have one unit")

    @classmethod
    def init(cls, dims: list[int], seed: int) -> "Mlp":
        """He-normal weights, zero biases."""
        rng = np.random.default_rng(seed)
        ws, bs = [], []
        for fan_in, fan_out in zip(dims, dims[1:]):
            ws.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
            bs.append(np.zeros(fan_out))
        return cls(ws, bs)

    @classmethod
    def zeros(cls, dims: list[int]) -> "Mlp":
        return cls([np.zeros((a, b)) for a, b in zip(dims, dims[1:])], [np.zeros(b) for b in dims[1:]])

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def _check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dims[0]:
            raise ValueError(f"feature dimension {x.shape[-1]} != network input {self.dims[0]}")
        return x

    def logits(self, x) -> np.ndarray:
        h = self._check(x)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return (h @ self.weights[-1] + self.biases[-1])[..., 0]

    def forward(self, x) -> np.ndarray:
        """Probability of label 1; a scalar for a single vector, else one per row."""
        return sigmoid(self.logits(x))

    def to_json(self) -> dict:
        return {
            "layer_dims": self.dims,
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_json(cls, d: dict) -> "Mlp":
        dims = d["layer_dims"]
        ws = [np.array(w, dtype=np.float64).reshape(a, b) for w, a, b in zip(d["weights"], dims, dims[1:])]
        return cls(ws, [np.array(b, dtype=np.float64) for b in d["biases"]])


def bce(p, y) -> np.ndarray:
    p = np.clip(p, PROB_CLAMP, 1 - PROB_CLAMP)
    return -(y * np.log(p) + (1 - y) * np.log(1 - p))


def loss_and_grad(mlp: Mlp, x, y, sample_weight=None):
    """Mean clamped BCE over the batch and its gradient, in ``mlp.params`` order."""
    x = mlp._check(np.atleast_2d(x))
    y = np.asarray(y, dtype=np.float64)
    n = x.shape[0]
    sw = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    acts = [x]
    h = x
    for w, b in zip(mlp.weights[:-1], mlp.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        acts.append(h)
    z = (h @ mlp.weights[-1] + mlp.biases[-1])[:, 0]
    p = sigmoid(z)
    loss = float(np.sum(sw * bce(p, y)) / n)
    # derivative of the clamped loss is zero where the clamp is active
    active = (p > PROB_CLAMP) & (p < 1 - PROB_CLAMP)
    delta = (sw * (p - y) * active / n)[:, None]
    grads: list[np.ndarray] = []
    for layer in range(len(mlp.weights) - 1, -1, -1):
        a = acts[layer]
        grads.append(delta.sum(axis=0))
        grads.append(a.T @ delta)
        if layer:
            delta = (delta @ mlp.weights[layer].T) * (a > 0)
    grads.reverse()
    return loss, grads


@dataclass
class AdamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, cfg: AdamConfig) -> None:
    """One in-place Adam update; advances ``state.t``."""
    state.t += 1
    t = state.t
    c1 = 1 - cfg.beta1**t
    c2 = 1 - cfg.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= cfg.beta1
        m += (1 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1 - cfg.beta2) * g * g
        p -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
