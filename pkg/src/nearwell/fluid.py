"""PVT and rock-fluid correlations at fixed temperature.

All functions work on floats, numpy arrays and :class:`~nearwell.ad.ADArray`
operands alike, so the simulator gets exact derivatives for free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nearwell import ad

BRINE = "brine"
GAS = "gas"
PHASES = (BRINE, GAS)


@dataclass(frozen=True)
class PhaseProperties:
    phase: str
    rho_ref: float  # kg/m³ at p_ref
    p_ref: float  # Pa
    compressibility: float  # 1/Pa
    mu_ref: float  # Pa·s
    mu_slope: float = 0.0  # Pa·s per Pa

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        if self.rho_ref <= 0 or self.mu_ref <= 0 or self.compressibility < 0:
            raise ValueError(f"invalid properties for {self.phase}: {self}")


@dataclass(frozen=True)
class RockFluid:
    s_br: float = 0.2  # residual brine saturation
    s_gr: float = 0.05  # residual gas saturation
    n_b: float = 2.0
    n_g: float = 2.0
    pc_entry: float = 0.0  # Pa
    phi: float = 0.35

    def __post_init__(self):
        if not (0 <= self.s_br and 0 <= self.s_gr and self.s_br + self.s_gr < 1):
            raise ValueError("residual saturations must satisfy 0 <= s_br + s_gr < 1")
        if self.n_b < 1 or self.n_g < 1:
            raise ValueError("Corey exponents must be >= 1")
        if not 0 < self.phi < 1:
            raise ValueError("porosity must lie in (0, 1)")


# defaults at 40 °C; analytic stand-ins for tabulated brine/CO2 PVT
BRINE_DEFAULT = PhaseProperties(BRINE, rho_ref=1010.0, p_ref=1.0e5, compressibility=4.5e-10, mu_ref=6.5e-4)
CO2_DEFAULT = PhaseProperties(GAS, rho_ref=700.0, p_ref=1.0e7, compressibility=1.0e-8, mu_ref=5.8e-5)


def density(props: PhaseProperties, p):
    """Exponential-compressibility density ``rho_ref * exp(c (p - p_ref))``."""
    return props.rho_ref * ad.exp(props.compressibility * (p - props.p_ref))


def density_change(props: PhaseProperties, rho_old, dp):
    """``rho(p_old + dp) - rho(p_old)`` without cancellation for tiny ``dp``."""
    return rho_old * ad.expm1(props.compressibility * dp)


def viscosity(props: PhaseProperties, p):
    """Linear in pressure, floored at a tenth of the reference viscosity."""
    mu = props.mu_ref + props.mu_slope * (p - props.p_ref)
    return ad.maximum(mu, 0.1 * props.mu_ref)


def rel_perm(rf: RockFluid, phase: str, s_g):
    """Corey relative permeability of ``phase`` as a function of gas saturation."""
    denom = 1.0 - rf.s_br - rf.s_gr
    if phase == GAS:
        se = (s_g - rf.s_gr) / denom
        n = rf.n_g
    elif phase == BRINE:
        se = (1.0 - s_g - rf.s_br) / denom
        n = rf.n_b
    else:
        raise ValueError(f"unknown phase {phase!r}")
    return ad.clip(se, 0.0, 1.0) ** n


def capillary_pressure(rf: RockFluid, s_g):
    """``p_b - p_g``; linear in gas saturation, zero by default."""
    return rf.pc_entry * s_g


def endpoint_rel_perm(rf: RockFluid, phase: str) -> float:
    """Relative permeability of a phase at its maximum saturation."""
    return float(rel_perm(rf, phase, np.array([1.0 - rf.s_br if phase == GAS else 0.0]))[0])
