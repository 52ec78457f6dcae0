"""Vector-graphic plots of the comparison, well-index and sensitivity data.

Each figure is written next to a CSV of the plotted series. SVG output is
made reproducible by dropping the date and fixing the hash salt.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from nearwell import units  # noqa: E402
from nearwell.cli.commands import FINE, _write_csv  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "nearwell"


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_bhp(report, scenario: str, path: Path) -> Path:
    """Bottom-hole pressure of every model and grid size of one scenario."""
    fig, ax = plt.subplots(figsize=(6, 4))
    t = report.times / units.DAY
    keys = sorted(k for k in report.series if k[0] == scenario)
    for key in keys:
        _, model, size = key
        style = {"color": "k", "lw": 2.0} if size == FINE else {"ls": "-" if model == "nn" else "--"}
        label = "fine benchmark" if size == FINE else f"{model}, {size} m"
        ax.plot(t, report.series[key] / units.BAR, label=label, **style)
    ax.set_xscale("log")
    ax.set_xlabel("time [days]")
    ax.set_ylabel("bottom-hole pressure [bar]")
    ax.set_title(scenario)
    ax.legend(fontsize=7)
    fig.tight_layout()
    return _save(fig, path)


def plot_wi_time(t: np.ndarray, wi: np.ndarray, wi_nn: np.ndarray | None, title: str, path: Path) -> Path:
    """Flow-based well index against time, with the network prediction if given."""
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t / units.DAY, wi, "o-", ms=3, label="fine simulation")
    rows = [[repr(float(a / units.DAY)), repr(float(b))] for a, b in zip(t, wi)]
    header = ["time_days", "wi"]
    if wi_nn is not None:
        ax.plot(t / units.DAY, wi_nn, "-", label="network")
        rows = [r + [repr(float(c))] for r, c in zip(rows, wi_nn)]
        header.append("wi_nn")
    ax.set_xlabel("time [days]")
    ax.set_ylabel("well index")
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    _write_csv(path.with_suffix(".csv"), header, rows)
    return _save(fig, path)


def plot_sensitivity(curves: dict[str, np.ndarray], path: Path) -> Path:
    """One panel per input: output curves while that input sweeps its range."""
    names = list(curves)
    n = len(names)
    cols = min(4, n)
    rows = int(np.ceil(n / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(3 * cols, 2.4 * rows), squeeze=False, sharey=True)
    table = []
    for ax, name in zip(axes.flat, names):
        c = curves[name]
        x = np.linspace(-1.0, 1.0, c.shape[1])
        ax.plot(x, c.T, lw=0.8, color="tab:blue", alpha=0.6)
        ax.set_title(name, fontsize=9)
        table.append([name, repr(float(np.mean(np.ptp(c, axis=1))))])
    for ax in list(axes.flat)[n:]:
        ax.axis("off")
    fig.supxlabel("scaled input")
    fig.supylabel("scaled output")
    fig.tight_layout()
    _write_csv(path.with_suffix(".csv"), ["feature", "mean_range"], table)
    return _save(fig, path)
