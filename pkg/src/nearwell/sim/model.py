"""Static flow model, solver state and run report containers."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from nearwell import fluid
from nearwell.grid import Connectivity
from nearwell.units import GRAVITY
from nearwell.wells import Well


class AssemblyError(RuntimeError):
    """Non-finite property or residual encountered during assembly."""


@dataclass
class FlowModel:
    """Everything that stays fixed during a run.

    ``two_phase=False`` drops the saturation unknowns and the gas phase; the
    brine phase then carries the injected fluid.
    """

    conn: Connectivity
    rock: fluid.RockFluid
    wells: list[Well]
    brine: fluid.PhaseProperties = fluid.BRINE_DEFAULT
    gas: fluid.PhaseProperties = fluid.CO2_DEFAULT
    two_phase: bool = True
    gravity: float = GRAVITY
    grid: object = None  # originating grid, kept for feature extraction

    def __post_init__(self):
        nc, nf = self.conn.n_cells, self.conn.n_faces
        lhs, rhs = self.conn.face_cells[:, 0], self.conn.face_cells[:, 1]
        rows = np.arange(nf)
        self.gather_l = sp.csr_matrix((np.ones(nf), (rows, lhs)), shape=(nf, nc))
        self.gather_r = sp.csr_matrix((np.ones(nf), (rows, rhs)), shape=(nf, nc))
        self.div = sp.csr_matrix((self.gather_l - self.gather_r).T)
        self.dz_face = self.conn.depth[lhs] - self.conn.depth[rhs]
        self.pore_volume = self.conn.bulk_volume * self.rock.phi * self.conn.pv_multiplier
        # unmultiplied pore volume, used to scale the convergence check
        self.pv_scale = self.conn.bulk_volume * self.rock.phi
        for w in self.wells:
            if not self.two_phase and w.phase != fluid.BRINE:
                raise ValueError("single-phase runs inject brine")
        # stacked connection -> cell scatter
        cells = np.concatenate([w.cells for w in self.wells]) if self.wells else np.zeros(0, int)
        self.n_conn = cells.shape[0]
        self.well_scatter = sp.csr_matrix(
            (np.ones(self.n_conn), (cells, np.arange(self.n_conn))), shape=(nc, self.n_conn)
        )

    @property
    def n_cells(self) -> int:
        return self.conn.n_cells

    @property
    def n_wells(self) -> int:
        return len(self.wells)

    @property
    def phases(self) -> tuple[str, ...]:
        return fluid.PHASES if self.two_phase else (fluid.BRINE,)

    @property
    def phase_props(self) -> dict[str, fluid.PhaseProperties]:
        if self.two_phase:
            return {fluid.BRINE: self.brine, fluid.GAS: self.gas}
        return {fluid.BRINE: self.brine}

    @property
    def n_unknowns(self) -> int:
        return self.n_cells * (2 if self.two_phase else 1) + self.n_wells

    def with_wells(self, wells: list[Well]) -> "FlowModel":
        return FlowModel(
            conn=self.conn, rock=self.rock, wells=wells, brine=self.brine, gas=self.gas,
            two_phase=self.two_phase, gravity=self.gravity, grid=self.grid,
        )


@dataclass
class ReservoirState:
    """Primary unknowns plus bookkeeping.

    Pressure is stored as ``p_base + dp`` with a fixed per-cell base (the
    initial pressure). Keeping the increment separate lets the accumulation
    term resolve tiny pressure changes in huge boundary pore volumes.
    """

    p_base: np.ndarray
    dp: np.ndarray
    s_g: np.ndarray
    bhp: np.ndarray
    t: float = 0.0
    v_tot: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def p(self) -> np.ndarray:
        return self.p_base + self.dp

    def copy(self, **changes) -> "ReservoirState":
        base = replace(
            self, dp=self.dp.copy(), s_g=self.s_g.copy(), bhp=self.bhp.copy(), v_tot=self.v_tot.copy()
        )
        return replace(base, **changes) if changes else base

    def vector(self, two_phase: bool) -> np.ndarray:
        parts = [self.dp, self.s_g] if two_phase else [self.dp]
        return np.concatenate(parts + [self.bhp])

    def with_vector(self, x: np.ndarray, two_phase: bool) -> "ReservoirState":
        nc = self.dp.shape[0]
        dp = x[:nc].copy()
        if two_phase:
            s_g = x[nc:2 * nc].copy()
            bhp = x[2 * nc:].copy()
        else:
            s_g = self.s_g.copy()
            bhp = x[nc:].copy()
        return replace(self, dp=dp, s_g=s_g, bhp=bhp, v_tot=self.v_tot.copy())


@dataclass(frozen=True)
class SimConfig:
    dt_init: float = 1.0  # s
    dt_max: float = 0.5 * 86400.0  # s
    dt_growth: float = 2.0
    newton_tol: float = 1e-8
    mass_balance_tol: float = 1e-11
    newton_max_iter: int = 15
    total_time: float = 10 * 86400.0  # s
    dt_min: float = 0.01  # s
    max_ds: float = 0.2  # saturation chop per iteration
    max_dp_rel: float = 0.5  # pressure chop, fraction of the base pressure

    def __post_init__(self):
        if min(self.dt_init, self.dt_max, self.newton_tol, self.total_time) <= 0:
            raise ValueError("time-step sizes and tolerances must be positive")
        if self.dt_growth < 1:
            raise ValueError("dt_growth must be >= 1")


@dataclass
class SimReport:
    times: np.ndarray
    bhp: np.ndarray  # (n_times, n_wells)
    v_tot: np.ndarray  # (n_times, n_wells), m³ at reference conditions
    pressure: np.ndarray  # (n_times, n_cells)
    saturation: np.ndarray  # (n_times, n_cells)
    conn_rate: np.ndarray  # (n_times, n_conn) total mass rate per connection, kg/s
    conn_p_well: np.ndarray  # (n_times, n_conn) wellbore pressure at connection
    newton_iterations: list[int] = field(default_factory=list)
    step_times: list[float] = field(default_factory=list)
    mass_balance_error: list[float] = field(default_factory=list)
    clamp_events: int = 0
    wall_time: float = 0.0
