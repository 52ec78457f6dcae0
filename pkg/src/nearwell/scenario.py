"""Physical set-up of one injection run and its radial or Cartesian flow model.

A :class:`Scenario` holds the parameters shared by the fine radial ensemble
members and the coarse Cartesian runs (pressure, layered permeability, rate,
fluids). The builders turn it into a :class:`~nearwell.sim.FlowModel` plus a
hydrostatic initial state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from nearwell import fluid, grid, wells
from nearwell.sim.model import FlowModel, ReservoirState
from nearwell.sim.solver import initial_state


@dataclass(frozen=True)
class Scenario:
    p_init: float  # Pa at the reservoir top
    k_h: tuple  # m², one entry per layer
    layer_heights: tuple  # m
    rate: float  # kg/s, full well
    phase: str = fluid.GAS
    kv_ratio: float = 1.0  # k_v / k_h
    r_w: float = 0.25
    brine: fluid.PhaseProperties = fluid.BRINE_DEFAULT
    gas: fluid.PhaseProperties = fluid.CO2_DEFAULT
    rock: fluid.RockFluid = field(default_factory=fluid.RockFluid)
    depth_top: float = 0.0
    name: str = ""

    def __post_init__(self):
        k = np.atleast_1d(np.asarray(self.k_h, dtype=float))
        h = np.atleast_1d(np.asarray(self.layer_heights, dtype=float))
        if k.shape != h.shape:
            raise ValueError(f"{k.size} permeabilities for {h.size} layers")
        if np.any(k <= 0) or np.any(h <= 0) or self.p_init <= 0 or self.kv_ratio <= 0:
            raise ValueError("pressure, permeabilities, heights and kv_ratio must be positive")
        object.__setattr__(self, "k_h", tuple(float(v) for v in k))
        object.__setattr__(self, "layer_heights", tuple(float(v) for v in h))

    @property
    def two_phase(self) -> bool:
        return self.phase == fluid.GAS

    @property
    def n_layers(self) -> int:
        return len(self.k_h)

    @property
    def thickness(self) -> float:
        return float(sum(self.layer_heights))

    @property
    def k_v(self) -> np.ndarray:
        return np.asarray(self.k_h) * self.kv_ratio

    @property
    def injected(self) -> fluid.PhaseProperties:
        return self.gas if self.two_phase else self.brine


def default_report_times(total_time: float, n: int = 30, first: float = 3600.0) -> np.ndarray:
    """Geometric report schedule, dense early, ending at ``total_time``."""
    return np.geomspace(first, total_time, n)


def _model(scn: Scenario, conn, well, g) -> FlowModel:
    return FlowModel(
        conn=conn, rock=scn.rock, wells=[well], brine=scn.brine, gas=scn.gas,
        two_phase=scn.two_phase, grid=g,
    )


def cartesian_case(scn: Scenario, g: grid.CartesianGrid, well_model=None) -> tuple[FlowModel, ReservoirState]:
    """Vertical injector through every layer of the well column of ``g``.

    The bottom-hole datum is the centre of the top layer. On a quarter grid
    the well index and the rate are scaled to the simulated quarter.
    """
    if g.n_z != scn.n_layers:
        raise ValueError(f"grid has {g.n_z} layers, scenario {scn.n_layers}")
    i0, j0 = g.well_column
    kh = np.asarray(scn.k_h)
    conn = g.connectivity(kh, scn.k_v)
    fraction = 0.25 if g.quarter else 1.0
    depths = g.layer_depths
    connections = []
    for layer in range(g.n_z):
        r_e = wells.equivalent_radius(g.dx[i0], g.dy[j0], kh[layer], kh[layer])
        wi = wells.wi_geometric(kh[layer], g.dz[layer], r_e, scn.r_w)
        connections.append(wells.Connection(g.cell_index(i0, j0, layer), depths[layer], fraction * wi, layer))
    well = wells.Well(
        "INJ", scn.r_w, connections, scn.rate, scn.phase,
        datum_depth=float(depths[0]), fraction=fraction, model=well_model,
        info={
            "r_e": wells.equivalent_radius(g.dx[i0], g.dy[j0], 1.0, 1.0),
            "k_h": kh.tolist(),
            "h": g.dz.tolist(),
        },
    )
    model = _model(scn, conn, well, g)
    return model, initial_state(model, scn.p_init, scn.depth_top)


def radial_case(
    scn: Scenario, r_outer: float = 100.0, n_r: int = 50, boundary_pv_multiplier: float = 1e6
) -> tuple[FlowModel, ReservoirState]:
    """Fine radial model with the wellbore as the inner boundary.

    Each layer connects the wellbore to its innermost ring through the exact
    radial transmissibility between ``r_w`` and the ring's centre radius, so
    the rate splits between layers according to the resolved flow.
    """
    g = grid.build_radial_log_grid(
        scn.r_w, r_outer, n_r, scn.layer_heights, depth_top=scn.depth_top,
        boundary_pv_multiplier=boundary_pv_multiplier,
    )
    conn = g.connectivity(np.asarray(scn.k_h), scn.k_v)
    rc0 = g.r_centers[0]
    depths = g.layer_depths
    connections = [
        wells.Connection(
            g.cell_index(layer, 0), depths[layer],
            2.0 * math.pi * scn.k_h[layer] * scn.layer_heights[layer] / math.log(rc0 / scn.r_w), layer,
        )
        for layer in range(g.n_z)
    ]
    well = wells.Well("INJ", scn.r_w, connections, scn.rate, scn.phase, datum_depth=float(depths[0]))
    model = _model(scn, conn, well, g)
    return model, initial_state(model, scn.p_init, scn.depth_top)
