"""Adam optimisation with seeded mini-batches and early stopping."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from nearwell.nn.network import FCNN, gradients, init_network, loss_mse
from nearwell.nn.scaling import Scaler

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    """Loss became non-finite."""


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 5000
    patience: int = 200
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1 or self.lr <= 0:
            raise ValueError("batch size, epochs, patience and lr must be positive")


@dataclass(frozen=True)
class Architecture:
    depth: int  # hidden layers
    width: int
    activation: str = "sigmoid"
    lr: float = 1e-3

    def sizes(self, n_inputs: int) -> tuple[int, ...]:
        return (n_inputs,) + (self.width,) * self.depth + (1,)


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params: list, grads: list, state: AdamState, cfg: TrainConfig, lr: float | None = None) -> list:
    """One bias-corrected Adam update; ``state`` is advanced in place."""
    lr = cfg.lr if lr is None else lr
    state.t += 1
    c1 = 1.0 - cfg.beta1 ** state.t
    c2 = 1.0 - cfg.beta2 ** state.t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g
        out.append(p - lr * (state.m[i] / c1) / (np.sqrt(state.v[i] / c2) + cfg.eps))
    return out


@dataclass
class TrainResult:
    net: FCNN
    scaler: Scaler
    history: dict = field(default_factory=dict)  # "train", "val": per-epoch scaled MSE
    best_epoch: int = 0

    @property
    def best_val(self) -> float:
        return float(self.history["val"][self.best_epoch])


def fit_scaled(net: FCNN, xs, ys, xv, yv, cfg: TrainConfig, lr: float | None = None):
    """Train ``net`` on already scaled data; returns best parameters, history, best epoch."""
    rng = np.random.default_rng(cfg.seed)
    n = xs.shape[0]
    params = [p.copy() for p in net.params]
    state = AdamState.zeros_like(params)
    work = FCNN(net.sizes, net.activation, params)
    hist_train, hist_val = [], []
    best, best_epoch, best_params = np.inf, 0, [p.copy() for p in params]
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = gradients(work, xs[idx], ys[idx])
            work.params = adam_step(work.params, grads, state, cfg, lr)
        tr = loss_mse(work, xs, ys)
        va = loss_mse(work, xv, yv)
        if not (np.isfinite(tr) and np.isfinite(va)):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        hist_train.append(tr)
        hist_val.append(va)
        if va < best:
            best, best_epoch, best_params = va, epoch, [p.copy() for p in work.params]
        elif epoch - best_epoch >= cfg.patience:
            break
    return best_params, {"train": np.array(hist_train), "val": np.array(hist_val)}, best_epoch


def train(x_train, y_train, x_val, y_val, arch: Architecture, cfg: TrainConfig = TrainConfig()) -> TrainResult:
    """Fit scaler on the training data, then train with early stopping.

    Returns the parameters of the epoch with the lowest validation loss.
    """
    x_train, y_train = np.atleast_2d(x_train), np.asarray(y_train, dtype=float)
    x_val, y_val = np.atleast_2d(x_val), np.asarray(y_val, dtype=float)
    if x_train.shape[0] == 0 or x_val.shape[0] == 0:
        raise ValueError("training and validation sets must be non-empty")
    scaler = Scaler.fit(x_train, y_train)
    net = init_network(arch.sizes(x_train.shape[1]), arch.activation, seed=cfg.seed)
    params, history, best_epoch = fit_scaled(
        net, scaler.scale_x(x_train), scaler.scale_y(y_train), scaler.scale_x(x_val), scaler.scale_y(y_val),
        cfg, lr=arch.lr,
    )
    log.info("trained %s: best val %.3g at epoch %d", arch, history["val"][best_epoch], best_epoch)
    return TrainResult(FCNN(net.sizes, net.activation, params), scaler, history, best_epoch)
