"""Trained well-index network as a well model inside the coarse simulator.

For every connection the features are read from the coarse state (own cell
and the cells directly above and below in the well column), passed through
clamping, scaling, the network and the inverse target transform. The
resulting index already contains mobility and density, so the connection's
total mass rate is ``WI * (p_well - p_i)``. Derivatives of the index with
respect to pressure and saturation are propagated into the Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from nearwell import ad, fluid, wells
from nearwell.nn.io import WellIndexNet
from nearwell.nn.network import input_gradient

EXTRACTORS = ("p", "p_u", "p_l", "s_g", "s_g_u", "s_g_l", "k", "k_u", "k_l", "h", "r_e", "v_tot", "expert")


class FeatureBindingError(ValueError):
    """Model features cannot be produced at runtime."""


@dataclass(frozen=True)
class RuntimeFeatureBinding:
    """Ordered extractor tags; missing vertical neighbours are padded with the
    own cell's pressure and zero saturation and permeability."""

    tags: tuple

    def __post_init__(self):
        unknown = [t for t in self.tags if t not in EXTRACTORS]
        if unknown:
            raise FeatureBindingError(f"no runtime extractor for features {unknown}")

    @classmethod
    def for_model(cls, model: WellIndexNet) -> "RuntimeFeatureBinding":
        return cls(tuple(model.spec.names))


def _neighbours(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Index of the connection above/below each connection and masks of existence."""
    idx = np.arange(n)
    has_up, has_lo = idx > 0, idx < n - 1
    return np.where(has_up, idx - 1, idx), np.where(has_lo, idx + 1, idx), has_up, has_lo


def extract_features(well: wells.Well, p, s, v_tot: float, binding: RuntimeFeatureBinding, n_unknowns: int):
    """Feature columns for every connection of ``well``.

    ``p`` and ``s`` are per-cell pressure and gas saturation (arrays or
    :class:`~nearwell.ad.ADArray`; ``s`` may be None for single-phase runs).
    Returns a list of columns (one per feature) and the value matrix.
    """
    n = well.n_connections
    cells = well.cells
    up, lo, has_up, has_lo = _neighbours(n)
    k = np.asarray(well.info["k_h"], dtype=float)
    h = np.asarray(well.info["h"], dtype=float)
    r_e = float(well.info["r_e"])

    def at(field, which):
        return field[cells[which]] if ad.is_ad(field) else np.asarray(field, dtype=float)[cells[which]]

    s_field = s if s is not None else np.zeros(int(np.max(cells)) + 1)
    zeros = np.zeros(n)
    source = {
        "p": lambda: at(p, np.arange(n)),
        "p_u": lambda: at(p, up),
        "p_l": lambda: at(p, lo),
        "s_g": lambda: at(s_field, np.arange(n)),
        "s_g_u": lambda: ad.where(has_up, at(s_field, up), zeros),
        "s_g_l": lambda: ad.where(has_lo, at(s_field, lo), zeros),
        "k": lambda: k.copy(),
        "k_u": lambda: np.where(has_up, k[up], 0.0),
        "k_l": lambda: np.where(has_lo, k[lo], 0.0),
        "h": lambda: h.copy(),
        "r_e": lambda: np.full(n, r_e),
        "v_tot": lambda: np.full(n, float(v_tot)),
        "expert": lambda: np.array([math.log10(wells.wi_geometric(k[i], h[i], r_e, well.r_w)) for i in range(n)]),
    }
    cols = [source[t]() for t in binding.tags]
    values = np.column_stack([ad.value(c) for c in cols]) if cols else np.zeros((n, 0))
    return cols, values


def nn_well_index(model: WellIndexNet, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    """Well index and its derivatives w.r.t. the raw features.

    Returns ``(wi (n,), dwi_dx (n, n_features), clamp_count)``; clamped
    features have zero derivative.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != model.spec.n_features:
        raise FeatureBindingError(f"model expects {model.spec.n_features} features, got {x.shape[1]}")
    sc = model.scaler
    xc, clipped = sc.clamp_x(x)
    out, dout_dz = input_gradient(model.net, sc.scale_x(xc))
    dz_dx = np.where(clipped, 0.0, 2.0 / (sc.x_max - sc.x_min))
    y = sc.unscale_y(out)
    dy = 0.5 * (sc.y_max - sc.y_min)
    if model.spec.target_transform == "log10":
        wi = 10.0 ** y
        dwi_dy = math.log(10.0) * wi
    else:
        wi = y
        dwi_dy = np.ones_like(y)
    return wi, (dwi_dy * dy)[:, None] * dout_dz * dz_dx, int(np.count_nonzero(clipped))


class NNWellModel:
    """Well-index model backed by a trained network.

    With ``lagged=True`` the index enters the residual without its state
    derivatives (a Picard-type coupling kept for debugging).
    """

    name = "nn"

    def __init__(self, model: WellIndexNet, binding: RuntimeFeatureBinding | None = None, lagged: bool = False):
        binding = binding or RuntimeFeatureBinding.for_model(model)
        if tuple(binding.tags) != tuple(model.spec.names):
            raise FeatureBindingError(f"binding {binding.tags} does not match model features {model.spec.names}")
        self.model = model
        self.binding = binding
        self.lagged = lagged
        self.last_clamp_events = 0

    def well_index(self, sim, well: wells.Well, p, s, ctx):
        iw = next(i for i, w in enumerate(sim.wells) if w is well)
        cols, values = extract_features(well, p, s, ctx.v_tot[iw], self.binding, sim.n_unknowns)
        wi, dwi, clamps = nn_well_index(self.model, values)
        self.last_clamp_events = clamps
        if self.lagged or getattr(ctx, "lagged", False):
            return wi
        return ad.compose(wi, cols, dwi, sim.n_unknowns)

    def connection_rates(self, sim, well: wells.Well, p, s, bhp_conn, ctx):
        wi = self.well_index(sim, well, p, s, ctx)
        inj = sim.phase_props[well.phase]
        h = wells.hydrostatic_offset(fluid.density(inj, bhp_conn), well.depths, well.datum_depth, sim.gravity)
        drawdown = bhp_conn + h - p[well.cells]
        return {well.phase: well.fraction * wi * drawdown}


def connection_rate_nn(model: WellIndexNet, features: np.ndarray, p_cell, p_well, fraction: float = 1.0):
    """Total mass rate of connections with the given raw features (no derivatives)."""
    wi, _, _ = nn_well_index(model, features)
    return fraction * wi * (np.asarray(p_well) - np.asarray(p_cell))
