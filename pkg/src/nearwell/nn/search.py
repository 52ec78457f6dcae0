"""Exhaustive architecture search ranked by validation loss."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace

from nearwell.nn.train import Architecture, TrainConfig, TrainResult, train

DEFAULT_GRID = {
    "depth": (2, 3, 5),
    "width": (10, 20, 50),
    "activation": ("sigmoid", "softplus"),
    "lr": (1e-3, 1e-2),
}


@dataclass
class SearchResult:
    best: Architecture
    result: TrainResult
    rows: list  # one dict per configuration

    def table(self) -> list[list]:
        cols = ["depth", "width", "activation", "lr", "n_params", "best_epoch", "val_loss"]
        return [cols] + [[r[c] for c in cols] for r in self.rows]


def architectures(grid: dict) -> list[Architecture]:
    keys = ("depth", "width", "activation", "lr")
    unknown = set(grid) - set(keys)
    if unknown:
        raise ValueError(f"unknown search keys {sorted(unknown)}")
    values = [tuple(grid.get(k, DEFAULT_GRID[k])) for k in keys]
    return [Architecture(*combo) for combo in itertools.product(*values)]


def hyperparameter_search(x_train, y_train, x_val, y_val, grid: dict | None = None,
                          cfg: TrainConfig = TrainConfig()) -> SearchResult:
    """Train every configuration; the lowest validation loss wins, ties go to
    the smaller network."""
    rows, results = [], []
    for arch in architectures(grid or DEFAULT_GRID):
        res = train(x_train, y_train, x_val, y_val, arch, replace(cfg, lr=arch.lr))
        results.append(res)
        rows.append({
            "depth": arch.depth, "width": arch.width, "activation": arch.activation, "lr": arch.lr,
            "n_params": res.net.n_params, "best_epoch": res.best_epoch, "val_loss": res.best_val,
        })
    order = sorted(range(len(rows)), key=lambda i: (rows[i]["val_loss"], rows[i]["n_params"]))
    best = order[0]
    r = rows[best]
    return SearchResult(Architecture(r["depth"], r["width"], r["activation"], r["lr"]), results[best], rows)
