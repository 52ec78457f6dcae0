"""Fine-scale radial ensembles of injection runs.

An :class:`EnsembleSpec` names the sampled parameters of an example family
(initial pressure, permeability, thickness) and the fixed ones. Each member
is run on a logarithmic radial grid with the wellbore as the inner boundary;
its :class:`MemberRecord` keeps exactly what the upscaling step needs.
"""

from __future__ import annotations

import io
import itertools
import logging
import os
import zipfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from nearwell import fluid, units
from nearwell.scenario import Scenario, default_report_times, radial_case
from nearwell.sim.model import SimConfig
from nearwell.sim.solver import SimulationFailure, run_simulation

log = logging.getLogger(__name__)

FAMILIES = ("h2o", "co2_2d", "co2_3d")


class EnsembleSpecError(ValueError):
    """Inconsistent ensemble specification."""


@dataclass(frozen=True)
class EnsembleSpec:
    """Sampled ranges (SI units) and fixed settings of one ensemble.

    Range keys are ``p_init``, ``h`` and ``k`` (or ``k1`` ... ``kL`` for the
    layered family). Keys listed in ``log_params`` are sampled uniformly in
    log10 space.
    """

    family: str
    ranges: dict
    n_members: int
    sampling: str = "random"  # or "grid"
    seed: int = 0
    rate: float = 0.0  # kg/s
    layer_heights: tuple = (5.0,)
    kv_ratio: float = 1.0
    r_w: float = 0.25
    r_outer: float = 100.0
    n_r: int = 50
    boundary_pv_multiplier: float = 1e6
    total_time: float = 10 * units.DAY
    n_reports: int = 30
    first_report: float = 3600.0
    log_params: tuple = ("k",)
    brine: fluid.PhaseProperties = fluid.BRINE_DEFAULT
    gas: fluid.PhaseProperties = fluid.CO2_DEFAULT
    rock: fluid.RockFluid = field(default_factory=fluid.RockFluid)
    sim: SimConfig = field(default_factory=SimConfig)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise EnsembleSpecError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n_members < 1:
            raise EnsembleSpecError("an ensemble needs at least one member")
        if self.sampling not in ("random", "grid"):
            raise EnsembleSpecError(f"unknown sampling {self.sampling!r}")
        if self.rate < 0:
            raise EnsembleSpecError("injection rate must be non-negative")
        missing = set(self.param_names) - set(self.ranges)
        extra = set(self.ranges) - set(self.param_names)
        if missing or extra:
            raise EnsembleSpecError(f"ranges must cover {self.param_names}; missing {missing}, unexpected {extra}")
        for name, (lo, hi) in self.ranges.items():
            if not lo <= hi:
                raise EnsembleSpecError(f"inverted range for {name}: [{lo}, {hi}]")
            if lo <= 0:
                raise EnsembleSpecError(f"range for {name} must be positive")
        object.__setattr__(self, "layer_heights", tuple(float(h) for h in self.layer_heights))

    @property
    def n_layers(self) -> int:
        return len(self.layer_heights)

    @property
    def param_names(self) -> tuple[str, ...]:
        if self.family == "h2o":
            return ("p_init", "k", "h")
        if self.family == "co2_2d":
            return ("p_init", "k")
        return ("p_init",) + tuple(f"k{i + 1}" for i in range(self.n_layers))

    @property
    def phase(self) -> str:
        return fluid.BRINE if self.family == "h2o" else fluid.GAS

    def is_log(self, name: str) -> bool:
        return any(name == p or (p == "k" and name[0] == "k" and name[1:].isdigit()) for p in self.log_params)

    def report_times(self) -> np.ndarray:
        return default_report_times(self.total_time, self.n_reports, self.first_report)


@dataclass(frozen=True)
class Member:
    member_id: int
    params: dict  # parameter name -> SI value


def _to_sampling_space(spec: EnsembleSpec, name: str, v):
    return np.log10(v) if spec.is_log(name) else np.asarray(v, dtype=float)


def _from_sampling_space(spec: EnsembleSpec, name: str, u):
    return 10.0 ** u if spec.is_log(name) else u


def build_ensemble(spec: EnsembleSpec) -> list[Member]:
    """Deterministic list of parameter tuples within the declared ranges."""
    names = spec.param_names
    bounds = [_to_sampling_space(spec, n, np.array(spec.ranges[n], dtype=float)) for n in names]
    if spec.sampling == "random":
        rng = np.random.default_rng(spec.seed)
        # one uniform draw per equal-width stratum of each axis, strata shuffled
        # independently per axis: marginals stay uniform and every range is
        # covered to within two strata
        n = spec.n_members
        u = np.column_stack([(rng.permutation(n) + rng.random(n)) / n for _ in names])
        cols = [lo + (hi - lo) * u[:, j] for j, (lo, hi) in enumerate(bounds)]
        rows = list(zip(*cols))
    else:
        sampled = [j for j, (lo, hi) in enumerate(bounds) if hi > lo]
        per_axis = round(spec.n_members ** (1.0 / max(len(sampled), 1)))
        if per_axis ** len(sampled) != spec.n_members:
            raise EnsembleSpecError(
                f"grid sampling of {len(sampled)} parameters needs a perfect power member count, got {spec.n_members}"
            )
        axes = [np.linspace(lo, hi, per_axis) if j in sampled else np.array([lo]) for j, (lo, hi) in enumerate(bounds)]
        rows = list(itertools.product(*axes))
    members = []
    for i, row in enumerate(rows):
        params = {}
        for n, u_val in zip(names, row):
            lo, hi = spec.ranges[n]
            v = float(_from_sampling_space(spec, n, u_val))
            params[n] = min(max(v, lo), hi)  # guard round-off at the range ends
        members.append(Member(i, params))
    return members


def member_scenario(spec: EnsembleSpec, member: Member) -> Scenario:
    p = member.params
    if spec.family == "co2_3d":
        k = [p[f"k{i + 1}"] for i in range(spec.n_layers)]
        heights = spec.layer_heights
    elif spec.family == "h2o":
        k, heights = [p["k"]], [p["h"]]
    else:
        k, heights = [p["k"]] * spec.n_layers, spec.layer_heights
    return Scenario(
        p_init=p["p_init"], k_h=k, layer_heights=heights, rate=spec.rate, phase=spec.phase,
        kv_ratio=spec.kv_ratio, r_w=spec.r_w, brine=spec.brine, gas=spec.gas, rock=spec.rock,
        name=f"member{member.member_id}",
    )


@dataclass
class MemberRecord:
    """Raw fine-scale output of one ensemble member.

    Field arrays are indexed ``[time, layer, ring]``; connection series
    ``[time, layer]``. ``q`` is the total mass rate into each layer and
    ``p_well`` the wellbore pressure at that layer's depth.
    """

    member_id: int
    params: dict
    times: np.ndarray
    r_faces: np.ndarray
    layer_heights: np.ndarray
    k_h: np.ndarray
    pressure: np.ndarray
    saturation: np.ndarray
    q: np.ndarray
    p_well: np.ndarray
    v_tot: np.ndarray
    r_w: float
    failed: bool = False
    message: str = ""

    @property
    def r_centers(self) -> np.ndarray:
        return np.sqrt(self.r_faces[:-1] * self.r_faces[1:])

    def save(self, path) -> None:
        """Write an ``.npz`` archive with fixed zip timestamps, so identical
        records give byte-identical files."""
        names = sorted(self.params)
        arrays = dict(
            member_id=np.int64(self.member_id),
            param_names=np.array(names),
            param_values=np.array([self.params[n] for n in names], dtype=float),
            times=self.times, r_faces=self.r_faces, layer_heights=self.layer_heights, k_h=self.k_h,
            pressure=self.pressure, saturation=self.saturation, q=self.q, p_well=self.p_well,
            v_tot=self.v_tot, r_w=np.float64(self.r_w), failed=np.bool_(self.failed),
            message=np.array(self.message),
        )
        with zipfile.ZipFile(path, "w", zipfile.ZIP_STORED) as zf:
            for key, value in arrays.items():
                buf = io.BytesIO()
                np.lib.format.write_array(buf, np.asarray(value), allow_pickle=False)
                zf.writestr(zipfile.ZipInfo(f"{key}.npy", date_time=(1980, 1, 1, 0, 0, 0)), buf.getvalue())

    @classmethod
    def load(cls, path) -> "MemberRecord":
        with np.load(path) as z:
            params = {str(n): float(v) for n, v in zip(z["param_names"], z["param_values"])}
            return cls(
                member_id=int(z["member_id"]), params=params, times=z["times"], r_faces=z["r_faces"],
                layer_heights=z["layer_heights"], k_h=z["k_h"], pressure=z["pressure"],
                saturation=z["saturation"], q=z["q"], p_well=z["p_well"], v_tot=z["v_tot"],
                r_w=float(z["r_w"]), failed=bool(z["failed"]), message=str(z["message"]),
            )


def run_member(spec: EnsembleSpec, member: Member) -> MemberRecord:
    """Simulate one member; failures are flagged rather than raised."""
    scn = member_scenario(spec, member)
    model, state0 = radial_case(scn, spec.r_outer, spec.n_r, spec.boundary_pv_multiplier)
    g = model.grid
    times = spec.report_times()
    nt, nz, nr = times.shape[0], g.n_z, g.n_r
    try:
        rep = run_simulation(model, state0, times, spec.sim)
    except SimulationFailure as exc:
        log.warning("member %d failed: %s", member.member_id, exc)
        nan = np.full((nt, nz, nr), np.nan)
        return MemberRecord(
            member.member_id, dict(member.params), times, g.r_faces, g.layer_heights, np.asarray(scn.k_h),
            nan, nan.copy(), np.full((nt, nz), np.nan), np.full((nt, nz), np.nan), np.full(nt, np.nan),
            spec.r_w, failed=True, message=str(exc),
        )
    return MemberRecord(
        member_id=member.member_id,
        params=dict(member.params),
        times=times,
        r_faces=g.r_faces,
        layer_heights=g.layer_heights,
        k_h=np.asarray(scn.k_h),
        pressure=rep.pressure.reshape(nt, nz, nr),
        saturation=rep.saturation.reshape(nt, nz, nr),
        q=rep.conn_rate.copy(),
        p_well=rep.conn_p_well.copy(),
        v_tot=rep.v_tot[:, 0].copy(),
        r_w=spec.r_w,
    )


def _run_one(args):
    spec, member = args
    return run_member(spec, member)


def member_path(out_dir, member_id: int) -> Path:
    return Path(out_dir) / f"member_{member_id:05d}.npz"


def _matches(path: Path, member: Member) -> bool:
    """True if ``path`` holds a record of exactly this member."""
    try:
        rec = MemberRecord.load(path)
    except (OSError, KeyError, ValueError):
        return False
    return rec.member_id == member.member_id and rec.params == dict(member.params)


def run_ensemble(spec: EnsembleSpec, out_dir=None, workers: int = 1) -> list[MemberRecord]:
    """Run every member, optionally in a process pool, ordered by member id.

    With ``out_dir`` each record is written to its own file as soon as it is
    done; existing files of the same member parameters are reused.
    """
    members = build_ensemble(spec)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    todo = [m for m in members if out_dir is None or not _matches(member_path(out_dir, m.member_id), m)]
    done = {}

    def finish(rec):
        done[rec.member_id] = rec
        if out_dir is not None:
            rec.save(member_path(out_dir, rec.member_id))

    if workers > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for rec in pool.map(_run_one, [(spec, m) for m in todo]):
                finish(rec)
    else:
        for m in todo:
            finish(run_member(spec, m))
    records = [done.get(m.member_id) or MemberRecord.load(member_path(out_dir, m.member_id)) for m in members]
    n_failed = sum(r.failed for r in records)
    if n_failed:
        log.warning("%d of %d members failed and will be excluded", n_failed, len(records))
    return records


def load_records(out_dir) -> list[MemberRecord]:
    paths = sorted(Path(out_dir).glob("member_*.npz"))
    return [MemberRecord.load(p) for p in paths]


def default_spec(family: str, **changes) -> EnsembleSpec:
    """Ensemble of an example family with the parameter ranges of its table."""
    if family == "h2o":
        spec = EnsembleSpec(
            family, {"p_init": (units.bar(50), units.bar(150)), "k": (1e-14, 1e-12), "h": (2.0, 20.0)},
            n_members=100, rate=units.m3_per_day(60.0, fluid.BRINE_DEFAULT.rho_ref), layer_heights=(1.0,),
        )
    elif family == "co2_2d":
        spec = EnsembleSpec(
            family, {"p_init": (units.bar(50), units.bar(120)), "k": (5e-13, 1e-11)},
            n_members=150, rate=units.tonne_per_day(9342.15), layer_heights=(5.0,),
        )
    elif family == "co2_3d":
        ranges = {"p_init": (units.bar(50), units.bar(120))}
        ranges.update({f"k{i + 1}": (5e-13, 1e-11) for i in range(5)})
        spec = EnsembleSpec(
            family, ranges, n_members=200, rate=units.tonne_per_day(9342.15),
            layer_heights=(5.0,) * 5, kv_ratio=0.5,
        )
    else:
        raise EnsembleSpecError(f"unknown family {family!r}")
    return replace(spec, **changes) if changes else spec
