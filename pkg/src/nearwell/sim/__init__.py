"""Fully-implicit finite-volume flow solver with exact Jacobians."""

from nearwell.sim.assembly import Residual, StepContext, assemble_residual, component_masses, mass_change
from nearwell.sim.model import AssemblyError, FlowModel, ReservoirState, SimConfig, SimReport
from nearwell.sim.solver import (
    LinearSolverError,
    NonConvergenceError,
    SimulationFailure,
    initial_state,
    newton_solve,
    run_simulation,
)

__all__ = [
    "AssemblyError",
    "FlowModel",
    "LinearSolverError",
    "NonConvergenceError",
    "ReservoirState",
    "Residual",
    "SimConfig",
    "SimReport",
    "SimulationFailure",
    "StepContext",
    "assemble_residual",
    "component_masses",
    "initial_state",
    "mass_change",
    "newton_solve",
    "run_simulation",
]
