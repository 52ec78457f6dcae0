"""Newton iteration and adaptive time stepping."""

from __future__ import annotations

import logging
import time as _time
from typing import Callable

import numpy as np
import scipy.sparse.linalg as spla

from nearwell import fluid
from nearwell.sim.assembly import Residual, StepContext, assemble_residual, mass_change
from nearwell.sim.model import FlowModel, ReservoirState, SimConfig, SimReport

log = logging.getLogger(__name__)


class NonConvergenceError(RuntimeError):
    """Newton did not reach the tolerance; the caller should cut the time step."""


class LinearSolverError(RuntimeError):
    """The Newton linear system could not be solved."""


class SimulationFailure(RuntimeError):
    """The time step fell below the minimum size."""


def scaled_residual(model: FlowModel, res: np.ndarray, dt: float) -> tuple[float, float]:
    """Return ``(max cell/well residual, relative global mass imbalance)``.

    Cell rows are converted to saturation-like units with the unmultiplied
    pore volume; well rows are relative to the target rate.
    """
    nc = model.n_cells
    worst = 0.0
    imbalance = 0.0
    q_ref = sum(w.rate * w.fraction for w in model.wells)
    for k, (a, props) in enumerate(model.phase_props.items()):
        r = res[k * nc:(k + 1) * nc]
        worst = max(worst, float(np.max(np.abs(r) * dt / (props.rho_ref * model.pv_scale))))
        ref = q_ref if q_ref > 0 else float(np.sum(props.rho_ref * model.pv_scale)) / dt
        imbalance = max(imbalance, abs(float(np.sum(r))) / ref)
    nph = len(model.phase_props)
    for iw, w in enumerate(model.wells):
        rw = res[nph * nc + iw]
        ref = w.rate * w.fraction if w.rate > 0 else 1.0
        worst = max(worst, abs(float(rw)) / ref)
    return worst, imbalance


def _converged(model, res, dt, config) -> bool:
    worst, imbalance = scaled_residual(model, res, dt)
    return worst < config.newton_tol and imbalance < config.mass_balance_tol


def newton_solve(
    model: FlowModel,
    prev: ReservoirState,
    dt: float,
    config: SimConfig,
    ctx: StepContext,
    guess: ReservoirState | None = None,
    assemble: Callable = assemble_residual,
) -> tuple[ReservoirState, Residual, int]:
    """Solve one implicit step; returns ``(state, final residual, linear solves)``."""
    state = (guess or prev).copy(t=ctx.t, v_tot=ctx.v_tot.copy())
    tp = model.two_phase
    nc = model.n_cells
    p_scale = max(float(np.max(np.abs(prev.p))), 1.0)
    for it in range(config.newton_max_iter + 1):
        res = assemble(model, state, prev, dt, ctx)
        if _converged(model, res.value, dt, config):
            return state, res, it
        if it == config.newton_max_iter:
            break
        try:
            dx = spla.spsolve(res.jac.tocsc(), -res.value)
        except RuntimeError as exc:  # singular factorisation
            raise LinearSolverError(str(exc)) from exc
        if not np.all(np.isfinite(dx)):
            raise LinearSolverError("non-finite Newton update")
        # Appleyard-type chop: limit every pressure and saturation change per cell
        dp_cap = config.max_dp_rel * p_scale
        dx[:nc] = np.clip(dx[:nc], -dp_cap, dp_cap)
        dx[-model.n_wells:] = np.clip(dx[-model.n_wells:], -dp_cap, dp_cap) if model.n_wells else dx[-model.n_wells:]
        if tp:
            dx[nc:2 * nc] = np.clip(dx[nc:2 * nc], -config.max_ds, config.max_ds)
        x = state.vector(tp) + dx
        if tp:
            x[nc:2 * nc] = np.clip(x[nc:2 * nc], 0.0, 1.0)
        state = state.with_vector(x, tp)
    raise NonConvergenceError(f"no convergence in {config.newton_max_iter} iterations (dt={dt:.3g} s)")


def initial_state(model: FlowModel, p_top: float, depth_top: float | None = None, s_g: float = 0.0) -> ReservoirState:
    """Hydrostatic brine column with pressure ``p_top`` at depth ``depth_top``.

    Pressures satisfy the discrete face balance ``p_j - p_i = g rho_face (z_j - z_i)``
    with the face-averaged density exactly, so the initial state carries no flow.
    """
    depth = model.conn.depth
    z_ref = float(np.min(depth)) if depth_top is None else depth_top
    levels = np.unique(depth)
    p_levels = np.empty_like(levels)
    g = model.gravity
    brine = model.brine
    # top cell: integrate the exponential column from the reference depth
    prev_z, prev_p = z_ref, p_top
    for k, z in enumerate(levels):
        p = prev_p
        rho_prev = fluid.density(brine, prev_p)
        for _ in range(50):
            if k == 0:
                p_new = prev_p + fluid.density(brine, 0.5 * (p + prev_p)) * g * (z - prev_z)
            else:
                p_new = prev_p + 0.5 * (rho_prev + fluid.density(brine, p)) * g * (z - prev_z)
            if abs(p_new - p) <= 1e-12 * abs(p_new):
                p = p_new
                break
            p = p_new
        p_levels[k] = p
        prev_z, prev_p = z, p
    p_cell = p_levels[np.searchsorted(levels, depth)]
    nw = model.n_wells
    bhp = np.empty(nw)
    for iw, w in enumerate(model.wells):
        bhp[iw] = p_cell[w.cells[0]] - fluid.density(model.phase_props[w.phase], p_cell[w.cells[0]]) * g * (
            w.connections[0].depth - w.datum_depth
        )
    return ReservoirState(
        p_base=p_cell.copy(),
        dp=np.zeros_like(p_cell),
        s_g=np.full_like(p_cell, s_g),
        bhp=bhp,
        t=0.0,
        v_tot=np.zeros(nw),
    )


def _injected_volume_rate(model: FlowModel) -> np.ndarray:
    return np.array([w.rate / model.phase_props[w.phase].rho_ref for w in model.wells])


def run_simulation(
    model: FlowModel,
    state0: ReservoirState,
    report_times,
    config: SimConfig,
    lagged: bool = False,
) -> SimReport:
    """March from ``state0`` through every report time with adaptive steps."""
    wall0 = _time.perf_counter()
    report_times = np.asarray(report_times, dtype=float)
    if np.any(np.diff(report_times) <= 0) or report_times[0] <= state0.t:
        raise ValueError("report times must be strictly increasing and after the initial time")
    vrate = _injected_volume_rate(model)
    nc, ncon = model.n_cells, model.n_conn
    nt = report_times.shape[0]
    rep = SimReport(
        times=report_times.copy(),
        bhp=np.empty((nt, model.n_wells)),
        v_tot=np.empty((nt, model.n_wells)),
        pressure=np.empty((nt, nc)),
        saturation=np.empty((nt, nc)),
        conn_rate=np.empty((nt, ncon)),
        conn_p_well=np.empty((nt, ncon)),
    )
    state = state0.copy()
    dt = config.dt_init
    k = 0
    while k < nt:
        target = report_times[k]
        step = min(dt, target - state.t)
        hit = step >= target - state.t - 1e-9 * max(1.0, target)
        if hit:
            step = target - state.t
        ctx = StepContext(t=state.t + step, v_tot=state.v_tot + vrate * step, lagged=lagged)
        try:
            new, res, its = newton_solve(model, state, step, config, ctx)
        except (NonConvergenceError, LinearSolverError) as exc:
            dt = 0.5 * step
            log.debug("cut time step to %.3g s: %s", dt, exc)
            if dt < config.dt_min:
                raise SimulationFailure(f"time step below {config.dt_min} s at t={state.t:.6g} s") from exc
            continue
        dm = mass_change(model, new, state)
        injected = {a: 0.0 for a in model.phase_props}
        for a in model.phase_props:
            injected[a] = float(np.sum(res.conn_rates[a])) * step
        err = max(
            abs(dm[a] - injected[a]) / max(abs(sum(injected.values())), 1e-300) for a in model.phase_props
        ) if sum(injected.values()) != 0 else max(abs(v) for v in dm.values())
        rep.mass_balance_error.append(err)
        rep.newton_iterations.append(its)
        rep.step_times.append(ctx.t)
        rep.clamp_events += res.clamp_events
        state = new
        if hit:
            state.t = target
            rep.bhp[k] = state.bhp
            rep.v_tot[k] = state.v_tot
            rep.pressure[k] = state.p
            rep.saturation[k] = state.s_g
            tot = np.zeros(ncon)
            for a in model.phase_props:
                tot += res.conn_rates[a]
            rep.conn_rate[k] = tot
            rep.conn_p_well[k] = res.conn_p_well
            k += 1
        if step >= dt * (1 - 1e-12):
            dt = min(dt * config.dt_growth, config.dt_max)
    rep.wall_time = _time.perf_counter() - wall0
    return rep
