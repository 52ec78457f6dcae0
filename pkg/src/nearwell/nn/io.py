"""Versioned plain-text model files.

Layout, one item per line::

    nearwell-fcnn 1
    family <name>
    transform identity|log10
    features <name> ...
    activation <name>
    sizes <n> <h1> ... 1
    x_min <v> ...
    x_max <v> ...
    y_range <min> <max>
    W <layer> <rows> <cols>      followed by <rows> lines of weights
    b <layer> <n>                followed by one line of biases

Floats are written with ``repr`` so a round trip is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nearwell.nn.network import FCNN
from nearwell.nn.scaling import Scaler
from nearwell.upscale import FeatureSpec

MAGIC = "nearwell-fcnn"
VERSION = 1


class ModelFormatError(ValueError):
    """Model file is malformed or inconsistent."""


@dataclass
class WellIndexNet:
    """A trained network together with its scaling and feature definition."""

    net: FCNN
    scaler: Scaler
    spec: FeatureSpec

    def __post_init__(self):
        if self.net.n_inputs != self.spec.n_features or self.scaler.n_features != self.spec.n_features:
            raise ModelFormatError(
                f"network takes {self.net.n_inputs} inputs, scaler {self.scaler.n_features}, "
                f"feature spec {self.spec.n_features}"
            )


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def save_model(path, model: WellIndexNet) -> None:
    net, sc, spec = model.net, model.scaler, model.spec
    lines = [
        f"{MAGIC} {VERSION}",
        f"family {spec.family}",
        f"transform {spec.target_transform}",
        "features " + " ".join(spec.names),
        f"activation {net.activation}",
        "sizes " + " ".join(str(s) for s in net.sizes),
        "x_min " + _fmt(sc.x_min),
        "x_max " + _fmt(sc.x_max),
        "y_range " + _fmt([sc.y_min, sc.y_max]),
    ]
    for layer in range(net.n_layers):
        w, b = net.params[2 * layer], net.params[2 * layer + 1]
        lines.append(f"W {layer} {w.shape[0]} {w.shape[1]}")
        lines.extend(_fmt(row) for row in w)
        lines.append(f"b {layer} {b.shape[0]}")
        lines.append(_fmt(b))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> WellIndexNet:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file {path} not found (run the train command first)")
    lines = path.read_text().splitlines()
    it = iter(lines)

    def field(key):
        parts = next(it).split()
        if not parts or parts[0] != key:
            raise ModelFormatError(f"{path}: expected '{key}' line, got {' '.join(parts)!r}")
        return parts[1:]

    head = next(it, "").split()
    if head[:1] != [MAGIC] or len(head) != 2:
        raise ModelFormatError(f"{path}: not a {MAGIC} file")
    if int(head[1]) != VERSION:
        raise ModelFormatError(f"{path}: unsupported version {head[1]}")
    try:
        family = field("family")[0]
        transform = field("transform")[0]
        names = tuple(field("features"))
        activation = field("activation")[0]
        sizes = tuple(int(s) for s in field("sizes"))
        x_min = np.array(field("x_min"), dtype=float)
        x_max = np.array(field("x_max"), dtype=float)
        y_min, y_max = (float(v) for v in field("y_range"))
        params = []
        for layer in range(len(sizes) - 1):
            tag = field("W")
            rows, cols = int(tag[1]), int(tag[2])
            if int(tag[0]) != layer or (rows, cols) != (sizes[layer + 1], sizes[layer]):
                raise ModelFormatError(
                    f"{path}: layer {layer} weight shape {(rows, cols)} does not match sizes {sizes}"
                )
            w = np.array([next(it).split() for _ in range(rows)], dtype=float)
            if w.shape != (rows, cols):
                raise ModelFormatError(f"{path}: layer {layer} weights have shape {w.shape}, expected {(rows, cols)}")
            tag = field("b")
            if int(tag[0]) != layer or int(tag[1]) != rows:
                raise ModelFormatError(f"{path}: layer {layer} bias length {tag[1]}, expected {rows}")
            b = np.array(next(it).split(), dtype=float)
            if b.shape != (rows,):
                raise ModelFormatError(f"{path}: layer {layer} bias has {b.size} entries, expected {rows}")
            params.extend([w, b])
    except StopIteration:
        raise ModelFormatError(f"{path}: file ends early") from None
    try:
        net = FCNN(sizes, activation, params)
        return WellIndexNet(net, Scaler(x_min, x_max, y_min, y_max), FeatureSpec(family, names, transform))
    except ModelFormatError:
        raise
    except ValueError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
