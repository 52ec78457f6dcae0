"""Run decks: versioned YAML (or JSON) describing one example end to end.

Decks use field units bar, days, m³/day and tonne/day; everything is
converted to SI on load. Unknown keys are rejected and every error names the
offending field and, when known, its line.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from nearwell import fluid, units
from nearwell.ensemble import EnsembleSpec
from nearwell.nn.train import TrainConfig
from nearwell.scenario import Scenario, default_report_times
from nearwell.sim.model import SimConfig
from nearwell.upscale import FeatureSpec

DECK_VERSION = 1
SHIPPED = ("h2o", "co2_2d", "co2_3d")


class DeckError(ValueError):
    """Schema violation in a run deck."""


_NUM = (int, float)
# section -> {key: (type, required)}
SCHEMA = {
    "": {
        "version": (int, True), "name": (str, True), "family": (str, True), "fluid": (dict, False),
        "rock": (dict, False), "well": (dict, True), "schedule": (dict, False), "solver": (dict, False),
        "ensemble": (dict, True), "dataset": (dict, True), "train": (dict, True), "simulation": (dict, True),
        "output": (dict, False),
    },
    "fluid": {"brine": (dict, False), "gas": (dict, False)},
    "fluid.brine": {
        "rho_ref": (_NUM, False), "p_ref_bar": (_NUM, False), "compressibility": (_NUM, False),
        "mu_ref": (_NUM, False), "mu_slope": (_NUM, False),
    },
    "rock": {
        "s_br": (_NUM, False), "s_gr": (_NUM, False), "n_b": (_NUM, False), "n_g": (_NUM, False),
        "pc_entry_bar": (_NUM, False), "phi": (_NUM, False),
    },
    "well": {"r_w": (_NUM, True), "rate_m3_per_day": (_NUM, False), "rate_tonne_per_day": (_NUM, False)},
    "schedule": {"total_days": (_NUM, False), "n_reports": (int, False), "first_report_s": (_NUM, False)},
    "solver": {
        "dt_init_s": (_NUM, False), "dt_max_days": (_NUM, False), "dt_growth": (_NUM, False),
        "newton_tol": (_NUM, False), "newton_max_iter": (int, False),
    },
    "ensemble": {
        "n_members": (int, True), "sampling": (str, False), "seed": (int, True),
        "p_init_bar": (list, True), "k": (list, True), "h": (list, False), "layer_heights": (list, False),
        "kv_ratio": (_NUM, False), "r_outer": (_NUM, False), "n_r": (int, False),
        "boundary_pv_multiplier": (_NUM, False),
    },
    "dataset": {"cell_sizes": (list, True), "split": (list, False), "seed": (int, True), "eps_dp": (_NUM, False)},
    "train": {
        "seed": (int, True), "batch_size": (int, False), "max_epochs": (int, False), "patience": (int, False),
        "beta1": (_NUM, False), "beta2": (_NUM, False), "eps": (_NUM, False), "search": (dict, False),
        "sensitivity": (dict, False),
    },
    "train.search": {"depth": (list, False), "width": (list, False), "activation": (list, False), "lr": (list, False)},
    "train.sensitivity": {"n_draws": (int, False), "seed": (int, True)},
    "simulation": {
        "domain": (_NUM, True), "cell_sizes": (list, True), "quarter": (bool, False),
        "boundary_pv_multiplier": (_NUM, False), "layer_heights": (list, False), "kv_ratio": (_NUM, False),
        "benchmark": (dict, True), "scenarios": (list, True),
    },
    "simulation.benchmark": {"fine_size": (_NUM, True), "outer_size": (_NUM, True), "near_extent": (_NUM, True)},
    "simulation.scenarios[]": {"name": (str, True), "p_init_bar": (_NUM, True), "k": (list, True), "h": (_NUM, False)},
    "output": {"dir": (str, False)},
}
SCHEMA["fluid.gas"] = SCHEMA["fluid.brine"]


@dataclass(frozen=True)
class Benchmark:
    fine_size: float
    outer_size: float
    near_extent: float


@dataclass(frozen=True)
class SimulationSetup:
    domain: float
    cell_sizes: tuple
    scenarios: tuple  # of Scenario
    benchmark: Benchmark
    quarter: bool = True
    boundary_pv_multiplier: float = 1e6


@dataclass
class RunDeck:
    name: str
    family: str
    ensemble: EnsembleSpec
    features: FeatureSpec
    dataset_sizes: tuple
    split: tuple
    dataset_seed: int
    eps_dp: float
    train: TrainConfig
    search: dict
    sensitivity_draws: int
    sensitivity_seed: int
    simulation: SimulationSetup
    sim_config: SimConfig
    report_times: tuple
    output_dir: Path
    source: Path | None = None
    raw: dict = field(default_factory=dict)


def _line_of(text: str, path: list) -> int | None:
    """1-based line of the node at ``path`` (keys and list indices) in ``text``."""
    try:
        node = yaml.compose(text)
    except yaml.YAMLError:
        return None
    for key in path:
        if isinstance(node, yaml.MappingNode):
            match = [v for k, v in node.value if k.value == key]
            if not match:
                return node.start_mark.line + 1
            node = match[0]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            break
    return node.start_mark.line + 1 if node is not None else None


def _check(section: str, data, path: list, text: str):
    if not isinstance(data, dict):
        raise DeckError(f"{'.'.join(map(str, path)) or 'deck'}: expected a mapping")
    schema = SCHEMA[section]
    for key, value in data.items():
        where = path + [key]
        if key not in schema:
            line = _line_of(text, where)
            raise DeckError(
                f"unknown field '{'.'.join(map(str, where))}'" + (f" (line {line})" if line else "")
                + f"; allowed: {', '.join(sorted(schema))}"
            )
        typ, _ = schema[key]
        if not isinstance(value, typ) or (typ is _NUM and isinstance(value, bool)):
            line = _line_of(text, where)
            raise DeckError(
                f"field '{'.'.join(map(str, where))}'" + (f" (line {line})" if line else "")
                + f" has type {type(value).__name__}, expected {getattr(typ, '__name__', 'number')}"
            )
    for key, (_, required) in schema.items():
        if required and key not in data:
            raise DeckError(f"missing required field '{'.'.join(map(str, path + [key]))}'")
    for key, value in data.items():
        sub = f"{section}.{key}" if section else key
        if sub in SCHEMA and isinstance(value, dict):
            _check(sub, value, path + [key], text)
        if f"{sub}[]" in SCHEMA:
            for i, item in enumerate(value):
                _check(f"{sub}[]", item, path + [key, i], text)


def _range(values, name, scale=1.0) -> tuple[float, float]:
    if len(values) != 2:
        raise DeckError(f"{name}: expected [low, high]")
    return float(values[0]) * scale, float(values[1]) * scale


def _phase(raw: dict, default: fluid.PhaseProperties) -> fluid.PhaseProperties:
    return fluid.PhaseProperties(
        default.phase,
        rho_ref=float(raw.get("rho_ref", default.rho_ref)),
        p_ref=units.bar(raw["p_ref_bar"]) if "p_ref_bar" in raw else default.p_ref,
        compressibility=float(raw.get("compressibility", default.compressibility)),
        mu_ref=float(raw.get("mu_ref", default.mu_ref)),
        mu_slope=float(raw.get("mu_slope", default.mu_slope)),
    )


def parse_deck(data: dict, text: str = "", source: Path | None = None, out_dir: Path | None = None) -> RunDeck:
    """Validate a loaded deck mapping and convert it to SI objects."""
    _check("", data, [], text)
    if data["version"] != DECK_VERSION:
        raise DeckError(f"deck version {data['version']} is not supported (expected {DECK_VERSION})")
    family = data["family"]
    if family not in SHIPPED:
        raise DeckError(f"family: unknown family {family!r}; expected one of {SHIPPED}")
    fl = data.get("fluid", {})
    brine = _phase(fl.get("brine", {}), fluid.BRINE_DEFAULT)
    gas = _phase(fl.get("gas", {}), fluid.CO2_DEFAULT)
    rk = dict(data.get("rock", {}))
    if "pc_entry_bar" in rk:
        rk["pc_entry"] = units.bar(rk.pop("pc_entry_bar"))
    try:
        rock = fluid.RockFluid(**{k: float(v) for k, v in rk.items()})
    except ValueError as exc:
        raise DeckError(f"rock: {exc}") from exc

    well = data["well"]
    rates = [k for k in ("rate_m3_per_day", "rate_tonne_per_day") if k in well]
    if len(rates) != 1:
        raise DeckError("well: give exactly one of rate_m3_per_day or rate_tonne_per_day")
    injected = brine if family == "h2o" else gas
    if rates[0] == "rate_m3_per_day":
        rate = units.m3_per_day(float(well["rate_m3_per_day"]), injected.rho_ref)
    else:
        rate = units.tonne_per_day(float(well["rate_tonne_per_day"]))
    r_w = float(well["r_w"])

    sch = data.get("schedule", {})
    total = units.days(float(sch.get("total_days", 10.0)))
    n_reports = int(sch.get("n_reports", 30))
    first = float(sch.get("first_report_s", 3600.0))
    sv = data.get("solver", {})
    sim_config = SimConfig(
        dt_init=float(sv.get("dt_init_s", 1.0)),
        dt_max=units.days(float(sv.get("dt_max_days", 0.5))),
        dt_growth=float(sv.get("dt_growth", 2.0)),
        newton_tol=float(sv.get("newton_tol", 1e-8)),
        newton_max_iter=int(sv.get("newton_max_iter", 15)),
        total_time=total,
    )

    ens = data["ensemble"]
    ranges = {"p_init": _range(ens["p_init_bar"], "ensemble.p_init_bar", units.BAR)}
    kv_ratio = float(ens.get("kv_ratio", 1.0))
    if family == "h2o":
        if "h" not in ens:
            raise DeckError("ensemble.h: required for the h2o family")
        ranges["k"] = _range(ens["k"], "ensemble.k")
        ranges["h"] = _range(ens["h"], "ensemble.h")
        heights = (1.0,)
    else:
        heights = tuple(float(h) for h in ens.get("layer_heights", [5.0]))
        if family == "co2_2d":
            ranges["k"] = _range(ens["k"], "ensemble.k")
        else:
            for i in range(len(heights)):
                ranges[f"k{i + 1}"] = _range(ens["k"], "ensemble.k")
    try:
        spec = EnsembleSpec(
            family, ranges, n_members=int(ens["n_members"]), sampling=ens.get("sampling", "random"),
            seed=int(ens["seed"]), rate=rate, layer_heights=heights, kv_ratio=kv_ratio, r_w=r_w,
            r_outer=float(ens.get("r_outer", 100.0)), n_r=int(ens.get("n_r", 50)),
            boundary_pv_multiplier=float(ens.get("boundary_pv_multiplier", 1e6)), total_time=total,
            n_reports=n_reports, first_report=first, brine=brine, gas=gas, rock=rock, sim=sim_config,
        )
    except ValueError as exc:
        raise DeckError(f"ensemble: {exc}") from exc

    ds = data["dataset"]
    split = tuple(float(v) for v in ds.get("split", [0.8, 0.1, 0.1]))
    if len(split) != 3 or abs(sum(split) - 1.0) > 1e-9:
        raise DeckError("dataset.split: three fractions summing to 1 expected")

    tr = data["train"]
    try:
        train = TrainConfig(
            batch_size=int(tr.get("batch_size", 64)), max_epochs=int(tr.get("max_epochs", 5000)),
            patience=int(tr.get("patience", 200)), beta1=float(tr.get("beta1", 0.9)),
            beta2=float(tr.get("beta2", 0.999)), eps=float(tr.get("eps", 1e-8)), seed=int(tr["seed"]),
        )
    except ValueError as exc:
        raise DeckError(f"train: {exc}") from exc
    search = {k: list(v) for k, v in tr.get("search", {}).items()}
    sens = tr.get("sensitivity", {"seed": 0})

    sim = data["simulation"]
    sim_heights = tuple(float(h) for h in sim.get("layer_heights", heights))
    sim_kv = float(sim.get("kv_ratio", kv_ratio))
    scenarios = []
    for i, sc in enumerate(sim["scenarios"]):
        k = [float(v) for v in sc["k"]]
        if family == "h2o":
            if "h" not in sc:
                raise DeckError(f"simulation.scenarios[{i}].h: required for the h2o family")
            layer_h = (float(sc["h"]),)
        else:
            layer_h = sim_heights
            if len(k) == 1 and len(layer_h) > 1:
                k = k * len(layer_h)
        if len(k) != len(layer_h):
            raise DeckError(f"simulation.scenarios[{i}].k: {len(k)} values for {len(layer_h)} layers")
        scenarios.append(Scenario(
            p_init=units.bar(float(sc["p_init_bar"])), k_h=k, layer_heights=layer_h, rate=rate,
            phase=fluid.BRINE if family == "h2o" else fluid.GAS, kv_ratio=sim_kv, r_w=r_w,
            brine=brine, gas=gas, rock=rock, name=sc["name"],
        ))
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise DeckError("simulation.scenarios: names must be unique")
    bm = sim["benchmark"]
    setup = SimulationSetup(
        domain=float(sim["domain"]),
        cell_sizes=tuple(float(v) for v in sim["cell_sizes"]),
        scenarios=tuple(scenarios),
        benchmark=Benchmark(float(bm["fine_size"]), float(bm["outer_size"]), float(bm["near_extent"])),
        quarter=bool(sim.get("quarter", True)),
        boundary_pv_multiplier=float(sim.get("boundary_pv_multiplier", 1e6)),
    )
    if out_dir is None:
        out = Path(data.get("output", {}).get("dir", f"runs/{data['name']}"))
        if source is not None and not out.is_absolute():
            out = Path.cwd() / out
    else:
        out = Path(out_dir)
    return RunDeck(
        name=data["name"], family=family, ensemble=spec, features=FeatureSpec.for_family(family),
        dataset_sizes=tuple(float(v) for v in ds["cell_sizes"]), split=split, dataset_seed=int(ds["seed"]),
        eps_dp=float(ds.get("eps_dp", 100.0)), train=train, search=search,
        sensitivity_draws=int(sens.get("n_draws", 20)), sensitivity_seed=int(sens["seed"]),
        simulation=setup, sim_config=sim_config,
        report_times=tuple(default_report_times(total, n_reports, first)),
        output_dir=out, source=source, raw=data,
    )


def load_deck(path, out_dir=None, overrides: dict | None = None) -> RunDeck:
    """Read and validate a deck file. ``overrides`` is merged section-wise
    before validation (handy for reduced test runs)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"deck {path} not found")
    text = path.read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise DeckError(f"{path}: {exc}") from exc
    if overrides:
        data = merge(data, overrides)
    return parse_deck(data, text, source=path, out_dir=out_dir)


def merge(base: dict, changes: dict) -> dict:
    out = dict(base)
    for k, v in changes.items():
        out[k] = merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def shipped_deck_path(name: str) -> Path:
    if name not in SHIPPED:
        raise DeckError(f"no shipped deck {name!r}; available: {', '.join(SHIPPED)}")
    return Path(str(resources.files("nearwell").joinpath("decks", f"{name}.yaml")))
