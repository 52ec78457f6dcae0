"""Fully-implicit residual of two-phase immiscible flow with wells."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from nearwell import fluid
from nearwell import ad
from nearwell.sim.model import AssemblyError, FlowModel, ReservoirState
from nearwell.wells import PeacemanModel

_PEACEMAN = PeacemanModel()


@dataclass
class Residual:
    value: np.ndarray
    jac: sp.csr_matrix
    # per-phase mass rate into each connection (kg/s), and wellbore pressure there
    conn_rates: dict
    conn_p_well: np.ndarray
    clamp_events: int = 0


@dataclass
class StepContext:
    """Per-step data handed to well models (time and injected volume at the
    new time level)."""

    t: float
    v_tot: np.ndarray
    lagged: bool = False


def _phase_pressures(model: FlowModel, p, s):
    out = {fluid.BRINE: p}
    if model.two_phase:
        out[fluid.GAS] = p - fluid.capillary_pressure(model.rock, s)
    return out


def _phase_saturations(model: FlowModel, s):
    if not model.two_phase:
        return {fluid.BRINE: 1.0}
    return {fluid.BRINE: 1.0 - s, fluid.GAS: s}


def component_masses(model: FlowModel, state: ReservoirState) -> dict[str, np.ndarray]:
    """Mass of each phase per cell (kg)."""
    pp = _phase_pressures(model, state.p, state.s_g)
    ss = _phase_saturations(model, state.s_g)
    return {
        a: model.pore_volume * fluid.density(props, pp[a]) * ss[a]
        for a, props in model.phase_props.items()
    }


def mass_change(model: FlowModel, state: ReservoirState, prev: ReservoirState) -> dict[str, float]:
    """Accurate per-phase total mass change between two states (kg)."""
    out = {}
    for a, acc in _accumulation(model, state.dp, state.s_g, state, prev).items():
        out[a] = float(np.sum(acc))
    return out


def _accumulation(model: FlowModel, dp, s, state: ReservoirState, prev: ReservoirState):
    """``PV * (rho S - rho_old S_old)`` written to avoid cancellation."""
    props = model.phase_props
    pc_new = fluid.capillary_pressure(model.rock, s) if model.two_phase else 0.0
    pc_old = fluid.capillary_pressure(model.rock, prev.s_g) if model.two_phase else 0.0
    p_old = prev.p
    ss_new = _phase_saturations(model, s)
    ss_old = _phase_saturations(model, prev.s_g)
    out = {}
    for a, pr in props.items():
        if a == fluid.BRINE:
            inc = dp - prev.dp
            p_old_a = p_old
        else:
            inc = (dp - prev.dp) - (pc_new - pc_old)
            p_old_a = p_old - pc_old
        rho_old = fluid.density(pr, p_old_a)
        drho = fluid.density_change(pr, rho_old, inc)
        rho_new = rho_old + drho
        ds = ss_new[a] - ss_old[a]
        out[a] = model.pore_volume * (rho_new * ds + drho * ss_old[a])
    return out


def assemble_residual(
    model: FlowModel, state: ReservoirState, prev: ReservoirState, dt: float, ctx: StepContext | None = None
) -> Residual:
    """Mass residuals per cell and phase plus one rate-control row per well.

    Unknown ordering is ``[dp (cells), S_g (cells, two-phase only), p_bhp (wells)]``,
    residual ordering ``[brine rows, gas rows, well rows]``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if ctx is None:
        ctx = StepContext(t=state.t, v_tot=state.v_tot)
    nc = model.n_cells
    if model.two_phase:
        dp, s, bhp = ad.variables(state.dp, state.s_g, state.bhp)
    else:
        dp, bhp = ad.variables(state.dp, state.bhp)
        s = None
    p = dp + state.p_base
    pp = _phase_pressures(model, p, s)
    acc = _accumulation(model, dp, s if s is not None else 0.0, state, prev)

    # face fluxes with phase-potential upwinding
    g = model.gravity
    res = {}
    mob_cell = {}
    for a, props in model.phase_props.items():
        rho = fluid.density(props, pp[a])
        kr = fluid.rel_perm(model.rock, a, s) if s is not None else 1.0
        mob = rho * kr / fluid.viscosity(props, pp[a])
        mob_cell[a] = mob
        if not np.all(np.isfinite(mob.val)):
            bad = int(np.flatnonzero(~np.isfinite(mob.val))[0])
            raise AssemblyError(f"non-finite {a} mobility in cell {bad}")
        if model.conn.n_faces:
            rho_face = 0.5 * (ad.matmul(model.gather_l, rho) + ad.matmul(model.gather_r, rho))
            dpot = ad.matmul(model.gather_l, pp[a]) - ad.matmul(model.gather_r, pp[a]) - rho_face * (g * model.dz_face)
            up = dpot.val >= 0.0
            mob_up = ad.where(up, ad.matmul(model.gather_l, mob), ad.matmul(model.gather_r, mob))
            flux = mob_up * dpot * model.conn.trans
            res[a] = acc[a] * (1.0 / dt) + ad.matmul(model.div, flux)
        else:
            res[a] = acc[a] * (1.0 / dt)

    # wells
    well_rows = []
    rates_all = {a: [] for a in model.phase_props}
    p_well_all = []
    clamp = 0
    for iw, well in enumerate(model.wells):
        bhp_conn = bhp[np.full(well.n_connections, iw)]
        wm = well.model if well.model is not None else _PEACEMAN
        rates = wm.connection_rates(model, well, p, s, bhp_conn, ctx)
        clamp += getattr(wm, "last_clamp_events", 0)
        total = None
        for a in model.phase_props:
            q = rates.get(a)
            if q is None:
                q = ad.constant(np.zeros(well.n_connections), model.n_unknowns)
            elif not ad.is_ad(q):
                q = ad.constant(q, model.n_unknowns)
            rates_all[a].append(q)
            total = q if total is None else total + q
        inj = model.phase_props[well.phase]
        rho_w = fluid.density(inj, bhp_conn.val)
        p_well_all.append(bhp_conn.val + rho_w * g * (well.depths - well.datum_depth))
        ones = sp.csr_matrix(np.ones((1, well.n_connections)))
        q_sum = ad.matmul(ones, total)
        well_rows.append(q_sum * -1.0 + well.rate * well.fraction)

    parts = []
    for a in model.phase_props:
        r = res[a]
        if model.wells:
            q = ad.concatenate(rates_all[a])
            r = r - ad.matmul(model.well_scatter, q)
        parts.append(r)
    parts.extend(well_rows)
    full = ad.concatenate(parts)
    if not np.all(np.isfinite(full.val)):
        bad = int(np.flatnonzero(~np.isfinite(full.val))[0])
        raise AssemblyError(f"non-finite residual at row {bad} (cell {bad % nc})")
    return Residual(
        value=full.val,
        jac=full.jac,
        conn_rates={a: (np.concatenate([q.val for q in v]) if v else np.zeros(0)) for a, v in rates_all.items()},
        conn_p_well=np.concatenate(p_well_all) if p_well_all else np.zeros(0),
        clamp_events=clamp,
    )
