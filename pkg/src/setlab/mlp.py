"""Minimal dense networks with explicit reverse-mode gradients.

One implementation serves both the trainer and exported elementwise encoders,
so a network evaluated directly and through an export hits the same code path
(and therefore the same floating-point values).
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError

ACTIVATIONS = ("tanh", "relu", "identity")


def _activate(name, a):
    if name == "tanh":
        return np.tanh(a)
    if name == "relu":
        return np.maximum(a, 0.0)
    return a


def _activation_slope(name, a, h):
    if name == "tanh":
        return 1.0 - h * h
    if name == "relu":
        return (a > 0.0).astype(float)  # subgradient 0 at the kink
    return np.ones_like(a)


@dataclass
class Mlp:
    """Fully connected layers; weights are (fan_out, fan_in), one activation
    name per layer ("tanh", "relu", or "identity")."""

    weights: list = field(default_factory=list)
    biases: list = field(default_factory=list)
    activations: list = field(default_factory=list)

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations) >= 1):
            raise ConfigError("weights, biases, and activations must align, one per layer")
        for i, (w, b, act) in enumerate(zip(self.weights, self.biases, self.activations)):
            if act not in ACTIVATIONS:
                raise ConfigError(f"unknown activation {act!r}")
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ConfigError(f"layer {i} has inconsistent shapes {w.shape} / {b.shape}")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ConfigError(f"layer {i} input width {w.shape[1]} does not chain")

    @classmethod
    def init(cls, layer_sizes, activations, seed):
        """Seeded uniform(-r, r) init with r = 1/sqrt(fan_in) for each layer."""
        if len(activations) != len(layer_sizes) - 1:
            raise ConfigError("need one activation per layer transition")
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            r = 1.0 / math.sqrt(fan_in)
            weights.append(rng.uniform(-r, r, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-r, r, size=fan_out))
        return cls(weights, biases, list(activations))

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    def forward(self, x):
        """Evaluate on a single input (in_dim,) or a batch (n, in_dim)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        out, _ = self.forward_trace(np.atleast_2d(x))
        return out[0] if single else out

    def forward_trace(self, X):
        """Batch forward pass keeping what backward needs: (output, trace)."""
        h = np.asarray(X, dtype=float)
        if h.ndim != 2 or h.shape[1] != self.weights[0].shape[1]:
            raise ShapeError(
                f"expected inputs of width {self.weights[0].shape[1]}, got shape {h.shape}"
            )
        trace = []
        for w, b, act in zip(self.weights, self.biases, self.activations):
            a = h @ w.T + b
            trace.append((h, a))
            h = _activate(act, a)
        return h, trace

    def backward(self, trace, grad_out):
        """Reverse-mode pass. grad_out is d(scalar)/d(output), shape (n, out).

        Returns (weight_grads, bias_grads, input_grad).
        """
        g = np.asarray(grad_out, dtype=float)
        weight_grads = [None] * len(self.weights)
        bias_grads = [None] * len(self.weights)
        for i in range(len(self.weights) - 1, -1, -1):
            h_in, a = trace[i]
            ga = g * _activation_slope(self.activations[i], a, _activate(self.activations[i], a))
            weight_grads[i] = ga.T @ h_in
            bias_grads[i] = ga.sum(axis=0)
            g = ga @ self.weights[i]
        return weight_grads, bias_grads, g

    def to_config(self):
        """JSON-ready dict; weight matrices are flattened row-major."""
        return {
            "layer_sizes": self.layer_sizes,
            "activations": list(self.activations),
            "weights": [w.reshape(-1).tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_config(cls, cfg):
        try:
            sizes = list(cfg["layer_sizes"])
            acts = list(cfg["activations"])
            weights = [
                np.asarray(flat, dtype=float).reshape(fan_out, fan_in)
                for flat, fan_in, fan_out in zip(cfg["weights"], sizes[:-1], sizes[1:])
            ]
            biases = [np.asarray(b, dtype=float) for b in cfg["biases"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed network config: {exc}") from None
        return cls(weights, biases, acts)


def mlp_forward(net, x):
    """Affine+activation composition on a single input (in,) or a batch (n, in)."""
    return net.forward(x)
