"""Well definitions, Peaceman well index and connection rates.

Rates are mass rates (kg/s), positive into the reservoir. A connection rate
follows ``q = WI * (p_bhp + h_wi - p_i)``; the Peaceman model multiplies the
geometric index by a mobility-density factor, the NN model (see
:mod:`nearwell.nnwell`) supplies the whole ``WI`` directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from nearwell import fluid
from nearwell.grid import InvalidGeometryError
from nearwell import ad
from nearwell.units import GRAVITY


@dataclass(frozen=True)
class Connection:
    cell: int
    depth: float  # m
    wi_geo: float  # m³, geometric index incl. symmetry share
    layer: int = 0


@dataclass
class Well:
    """Rate-controlled injector.

    ``rate`` is the full-well mass rate; ``fraction`` is the share of the well
    represented by the simulated (possibly symmetry-reduced) domain.
    """

    name: str
    r_w: float
    connections: list[Connection]
    rate: float  # kg/s
    phase: str = fluid.GAS
    datum_depth: float = 0.0
    fraction: float = 1.0
    model: object = None  # WellIndexModel; None -> multiphase Peaceman
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.r_w <= 0:
            raise InvalidGeometryError("wellbore radius must be positive")
        if not self.connections:
            raise ValueError(f"well {self.name} has no connections")
        if self.rate < 0:
            raise ValueError("only injectors (rate >= 0) are supported")

    @property
    def n_connections(self) -> int:
        return len(self.connections)

    @property
    def cells(self) -> np.ndarray:
        return np.array([c.cell for c in self.connections])

    @property
    def depths(self) -> np.ndarray:
        return np.array([c.depth for c in self.connections])


def equivalent_radius(dx: float, dy: float, kx: float, ky: float) -> float:
    """Peaceman's equivalent radius of a well block with anisotropic permeability."""
    if min(dx, dy, kx, ky) <= 0:
        raise InvalidGeometryError("cell sizes and permeabilities must be positive")
    a = math.sqrt(ky / kx)
    b = math.sqrt(kx / ky)
    return 0.28 * math.sqrt(a * dx**2 + b * dy**2) / ((ky / kx) ** 0.25 + (kx / ky) ** 0.25)


def wi_geometric(k: float, h: float, r_e: float, r_w: float) -> float:
    """Geometric well index ``2 pi k h / ln(r_e / r_w)`` (m³)."""
    if r_w <= 0 or r_e <= r_w:
        raise InvalidGeometryError(f"Peaceman needs r_e > r_w > 0 (r_e={r_e}, r_w={r_w})")
    return 2.0 * math.pi * k * h / math.log(r_e / r_w)


def hydrostatic_offset(rho_well, depth_conn: float, depth_datum: float, g: float = GRAVITY):
    """Pressure difference between a connection and the bottom-hole datum."""
    return rho_well * g * (depth_conn - depth_datum)


def injected_mobility(props: fluid.PhaseProperties, rf: fluid.RockFluid, p_well):
    """``k_r rho / mu`` of the injected stream at wellbore conditions."""
    kr = fluid.endpoint_rel_perm(rf, props.phase)
    return kr * fluid.density(props, p_well) / fluid.viscosity(props, p_well)


def connection_rate_peaceman(wi_geo, phases: dict, rf, injected: str, p_cell, s_cell, p_bhp, h_wi):
    """Per-phase mass rates at a set of connections (multiphase Peaceman).

    Injection (wellbore above cell pressure) carries only the injected phase
    with wellbore-condition mobility; backflow carries every phase with the
    cell's upwind mobility.
    """
    p_well = p_bhp + h_wi
    drawdown = p_well - p_cell
    inflow = ad.value(drawdown) > 0.0
    rates = {}
    for name, props in phases.items():
        cell_mob = fluid.rel_perm(rf, name, s_cell) * fluid.density(props, p_cell) / fluid.viscosity(props, p_cell)
        if name == injected:
            mob = ad.where(inflow, injected_mobility(props, rf, p_well), cell_mob)
        else:
            mob = ad.where(inflow, 0.0 * ad.value(drawdown), cell_mob)
        rates[name] = wi_geo * mob * drawdown
    return rates


def rate_control_residual(target: float, rates) -> float:
    """``Q_t - sum_i q_i``: zero when the connection rates honour the target."""
    total = 0.0
    for q in rates:
        total = total + (q.val.sum() if ad.is_ad(q) else np.sum(q))
    return target - total


class PeacemanModel:
    """Multiphase Peaceman: geometric index times upwinded mobility-density."""

    name = "peaceman"

    def connection_rates(self, sim, well: Well, p, s, bhp_conn, ctx):
        """``bhp_conn`` is the well's bottom-hole pressure repeated per connection."""
        cells = well.cells
        wi = np.array([c.wi_geo for c in well.connections])
        inj = sim.phase_props[well.phase]
        h = hydrostatic_offset(fluid.density(inj, bhp_conn), well.depths, well.datum_depth, sim.gravity)
        p_cell = p[cells]
        s_cell = s[cells] if s is not None else np.zeros(len(cells))
        return connection_rate_peaceman(wi, sim.phase_props, sim.rock, well.phase, p_cell, s_cell, bhp_conn, h)
