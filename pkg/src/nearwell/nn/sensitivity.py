"""One-at-a-time input sweeps in scaled space."""

from __future__ import annotations

import numpy as np

from nearwell.nn.network import FCNN, forward


def sensitivity(net: FCNN, index: int, n_draws: int = 20, seed: int = 0, n_points: int = 101) -> np.ndarray:
    """Output curves ``(n_draws, n_points)`` while input ``index`` sweeps [-1, 1]
    and the other inputs stay at random values in [-1, 1]."""
    if not 0 <= index < net.n_inputs:
        raise IndexError(f"input {index} out of range for {net.n_inputs} inputs")
    rng = np.random.default_rng(seed)
    sweep = np.linspace(-1.0, 1.0, n_points)
    curves = np.empty((n_draws, n_points))
    for d in range(n_draws):
        x = np.repeat(rng.uniform(-1.0, 1.0, size=(1, net.n_inputs)), n_points, axis=0)
        x[:, index] = sweep
        curves[d] = forward(net, x)
    return curves


def mean_ranges(net: FCNN, n_draws: int = 20, seed: int = 0, n_points: int = 101) -> np.ndarray:
    """Mean output range (max - min over the sweep) for every input."""
    return np.array([
        np.mean(np.ptp(sensitivity(net, i, n_draws, seed, n_points), axis=1)) for i in range(net.n_inputs)
    ])
