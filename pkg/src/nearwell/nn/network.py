"""Fully connected regression network with exact backpropagation.

Parameters are stored as a flat list ``[W1, b1, W2, b2, ...]`` with
``W`` of shape ``(fan_out, fan_in)``. Hidden layers apply the activation,
the output layer is linear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _sigmoid(z):
    # split by sign so neither branch overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _softplus(z):
    return np.logaddexp(0.0, z)


ACTIVATIONS = {
    "sigmoid": (_sigmoid, lambda z: _sigmoid(z) * (1.0 - _sigmoid(z))),
    "tanh": (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z: (z > 0).astype(float)),
    "softplus": (_softplus, _sigmoid),
    "linear": (lambda z: z, np.ones_like),
}


@dataclass
class FCNN:
    sizes: tuple
    activation: str
    params: list

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        self.sizes = tuple(int(s) for s in self.sizes)
        if len(self.sizes) < 2 or min(self.sizes) < 1:
            raise ValueError(f"invalid layer sizes {self.sizes}")
        if len(self.params) != 2 * (len(self.sizes) - 1):
            raise ValueError(f"{len(self.params)} parameter arrays for {len(self.sizes) - 1} layers")
        for layer, (n_in, n_out) in enumerate(zip(self.sizes[:-1], self.sizes[1:])):
            w, b = self.params[2 * layer], self.params[2 * layer + 1]
            if w.shape != (n_out, n_in) or b.shape != (n_out,):
                raise ValueError(f"layer {layer}: expected W {(n_out, n_in)} and b {(n_out,)}, got {w.shape} and {b.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {layer} has non-finite parameters")

    @property
    def n_inputs(self) -> int:
        return self.sizes[0]

    @property
    def n_layers(self) -> int:
        return len(self.sizes) - 1

    @property
    def n_params(self) -> int:
        return int(sum(p.size for p in self.params))

    def copy(self) -> "FCNN":
        return FCNN(self.sizes, self.activation, [p.copy() for p in self.params])


def init_network(sizes, activation: str = "sigmoid", seed: int = 0) -> FCNN:
    """Glorot-uniform weights ``U(-a, a)``, ``a = sqrt(6 / (fan_in + fan_out))``, zero biases."""
    rng = np.random.default_rng(seed)
    params = []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        a = np.sqrt(6.0 / (n_in + n_out))
        params.append(rng.uniform(-a, a, size=(n_out, n_in)))
        params.append(np.zeros(n_out))
    return FCNN(tuple(sizes), activation, params)


def _forward_cache(net: FCNN, x: np.ndarray):
    act = ACTIVATIONS[net.activation][0]
    a = np.atleast_2d(np.asarray(x, dtype=float))
    if a.shape[1] != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} inputs, got {a.shape[1]}")
    pre, post = [], [a]
    for layer in range(net.n_layers):
        z = a @ net.params[2 * layer].T + net.params[2 * layer + 1]
        pre.append(z)
        a = z if layer == net.n_layers - 1 else act(z)
        post.append(a)
    return pre, post


def forward(net: FCNN, x: np.ndarray) -> np.ndarray:
    """Network output for a batch ``x`` of shape ``(K, n)``; returns ``(K,)``."""
    return _forward_cache(net, x)[1][-1][:, 0]


def loss_mse(net: FCNN, x: np.ndarray, y: np.ndarray) -> float:
    r = forward(net, x) - np.asarray(y, dtype=float)
    return float(np.mean(r * r))


def gradients(net: FCNN, x: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray]]:
    """Mean-squared-error loss and its exact gradient w.r.t. every parameter."""
    dact = ACTIVATIONS[net.activation][1]
    pre, post = _forward_cache(net, x)
    k = post[0].shape[0]
    r = post[-1][:, 0] - np.asarray(y, dtype=float)
    loss = float(np.mean(r * r))
    delta = (2.0 / k) * r[:, None]
    grads = [None] * len(net.params)
    for layer in range(net.n_layers - 1, -1, -1):
        grads[2 * layer] = delta.T @ post[layer]
        grads[2 * layer + 1] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ net.params[2 * layer]) * dact(pre[layer - 1])
    return loss, grads


def input_gradient(net: FCNN, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Output values ``(K,)`` and their derivatives ``(K, n)`` w.r.t. the inputs."""
    dact = ACTIVATIONS[net.activation][1]
    pre, post = _forward_cache(net, x)
    k = post[0].shape[0]
    delta = np.ones((k, 1))
    for layer in range(net.n_layers - 1, -1, -1):
        delta = delta @ net.params[2 * layer]
        if layer > 0:
            delta = delta * dact(pre[layer - 1])
    return post[-1][:, 0], delta
