"""Minimal dense networks with hand-rolled reverse-mode gradients and Adam.

All four network roles in the package (encoder, decoder, actor, critics) are
plain MLPs: ReLU hidden layers, identity output. Heads (tanh squash, Gaussian
log-density, softmax) live with their owners and chain into `backward` via the
output gradient.
"""

from __future__ import annotations

import json
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, PoisonedUpdateError

CHECKPOINT_FORMAT = "densenet-v1"
DEFAULT_HIDDEN = (256, 256)


class DenseNet:
    """Feedforward net. Weight init: uniform in +-1/sqrt(fan_in)."""

    def __init__(self, layer_sizes: Sequence[int], rng: Optional[np.random.Generator] = None):
        if len(layer_sizes) < 2:
            raise InvalidArgumentError("need at least an input and an output size")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.layer_sizes = list(int(s) for s in layer_sizes)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.layer_sizes, self.layer_sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=fan_out))

    @classmethod
    def mlp(cls, in_dim: int, out_dim: int, hidden: Sequence[int] = DEFAULT_HIDDEN,
            rng: Optional[np.random.Generator] = None) -> "DenseNet":
        return cls([in_dim, *hidden, out_dim], rng=rng)

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def forward_cached(self, x: np.ndarray):
        """Returns (output, cache); accepts a single vector or a (B, d) batch."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.in_dim:
            raise InvalidArgumentError(
                f"input dim {h.shape[1]} != first layer size {self.in_dim}"
            )
        activations = [h]
        n = len(self.weights)
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < n - 1:
                h = np.maximum(h, 0.0)
            activations.append(h)
        cache = (activations, single)
        return (h[0] if single else h), cache

    def forward(self, x: np.ndarray) -> np.ndarray:
        y, _ = self.forward_cached(x)
        return y

    def backward_cached(self, cache, output_gradient: np.ndarray):
        """Gradients of <output, output_gradient> w.r.t. parameters and input."""
        activations, single = cache
        g = np.asarray(output_gradient, dtype=np.float64)
        if single:
            g = g[None, :]
        if g.shape != activations[-1].shape:
            raise InvalidArgumentError(
                f"output gradient shape {g.shape} != output shape {activations[-1].shape}"
            )
        grads: list[np.ndarray] = [None] * (2 * len(self.weights))
        n = len(self.weights)
        for i in range(n - 1, -1, -1):
            a_in = activations[i]
            grads[2 * i] = a_in.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.weights[i].T
            if i > 0:
                g = g * (activations[i] > 0.0)
        dx = g[0] if single else g
        return grads, dx

    def backward(self, x: np.ndarray, output_gradient: np.ndarray):
        _, cache = self.forward_cached(x)
        return self.backward_cached(cache, output_gradient)

    def copy(self) -> "DenseNet":
        other = DenseNet.__new__(DenseNet)
        other.layer_sizes = list(self.layer_sizes)
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "sizes": self.layer_sizes,
            "layers": [
                {"w": w.tolist(), "b": b.tolist()}
                for w, b in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DenseNet":
        if obj.get("format") != CHECKPOINT_FORMAT:
            raise InvalidArgumentError(f"unsupported checkpoint format {obj.get('format')!r}")
        net = cls.__new__(cls)
        net.layer_sizes = list(obj["sizes"])
        net.weights = [np.array(layer["w"], dtype=np.float64) for layer in obj["layers"]]
        net.biases = [np.array(layer["b"], dtype=np.float64) for layer in obj["layers"]]
        return net

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> "DenseNet":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def forward(net: DenseNet, x: np.ndarray) -> np.ndarray:
    return net.forward(x)


def backward(net: DenseNet, x: np.ndarray, output_gradient: np.ndarray):
    return net.backward(x, output_gradient)


class Adam:
    """Adaptive-moment optimizer over a fixed list of parameter arrays."""

    def __init__(self, params: Sequence[np.ndarray], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        """In-place update; raises PoisonedUpdateError on non-finite gradients."""
        if len(params) != len(self.m) or len(grads) != len(self.m):
            raise InvalidArgumentError("params/grads count does not match optimizer state")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise PoisonedUpdateError("non-finite gradient in adam_step")
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
            if not np.all(np.isfinite(p)):
                raise PoisonedUpdateError("non-finite parameter after adam_step")


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], opt: Adam) -> None:
    opt.step(params, grads)
