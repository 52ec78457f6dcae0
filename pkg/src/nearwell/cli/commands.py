"""The five pipeline commands, callable without the argument parser.

Every command reads its inputs from and writes its outputs under
``deck.output_dir``::

    members/member_XXXX.npz        ensemble
    dataset/{train,val,test}.csv   dataset
    dataset/drops.csv
    model.txt, search.csv,         train
    history.csv, sensitivity.csv
    reports/<scenario>__<model>__<size>.csv, timings.csv   simulate
    compare/...                    compare
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from nearwell import ensemble, grid, units, upscale
from nearwell.cli.deck import RunDeck
from nearwell.nn import WellIndexNet, hyperparameter_search, load_model, mean_ranges, save_model, sensitivity
from nearwell.nnwell import NNWellModel
from nearwell.scenario import Scenario, cartesian_case
from nearwell.sim import run_simulation

log = logging.getLogger(__name__)

WELL_MODELS = ("peaceman", "nn")
FINE = "fine"
REPORT_COLUMNS = ("time_s", "time_days", "bhp_bar", "rate_kg_s", "newton_iterations", "clamp_events")


class MissingArtifactError(FileNotFoundError):
    """An upstream artifact is absent; the message names the command that makes it."""


@dataclass(frozen=True)
class Layout:
    root: Path

    @property
    def members(self) -> Path:
        return self.root / "members"

    @property
    def dataset(self) -> Path:
        return self.root / "dataset"

    @property
    def model(self) -> Path:
        return self.root / "model.txt"

    @property
    def reports(self) -> Path:
        return self.root / "reports"

    @property
    def timings(self) -> Path:
        return self.root / "reports" / "timings.csv"

    @property
    def compare(self) -> Path:
        return self.root / "compare"

    def split(self, name: str) -> Path:
        return self.dataset / f"{name}.csv"

    def report(self, scenario: str, well_model: str, size) -> Path:
        return self.reports / f"{scenario}__{well_model}__{size_label(size)}.csv"


def size_label(size) -> str:
    if size == FINE:
        return FINE
    return f"{float(size):g}"


def _require(path: Path, command: str, deck: RunDeck, what: str):
    if not path.exists():
        src = deck.source if deck.source is not None else "<deck>"
        raise MissingArtifactError(
            f"{what} not found at {path}; run `nearwell {command} --deck {src} --out {deck.output_dir}` first"
        )


def _write_csv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


# ---------------------------------------------------------------------------
# ensemble / dataset / train


def cmd_ensemble(deck: RunDeck, workers: int = 1) -> list[Path]:
    """Run (or reuse) every fine radial member of the deck's ensemble."""
    lay = Layout(deck.output_dir)
    records = ensemble.run_ensemble(deck.ensemble, lay.members, workers=workers)
    return [ensemble.member_path(lay.members, r.member_id) for r in records]


def cmd_dataset(deck: RunDeck) -> dict[str, Path]:
    """Upscale the member files into train/val/test CSV files."""
    lay = Layout(deck.output_dir)
    members = ensemble.build_ensemble(deck.ensemble)
    missing = [m.member_id for m in members if not ensemble.member_path(lay.members, m.member_id).exists()]
    if missing:
        _require(ensemble.member_path(lay.members, missing[0]), "ensemble", deck, f"{len(missing)} member files")
    records = [ensemble.MemberRecord.load(ensemble.member_path(lay.members, m.member_id)) for m in members]
    train, val, test, stats = upscale.assemble_dataset(
        records, deck.features, deck.dataset_sizes, deck.split, deck.dataset_seed, deck.eps_dp
    )
    lay.dataset.mkdir(parents=True, exist_ok=True)
    out = {}
    for name, ds in (("train", train), ("val", val), ("test", test)):
        out[name] = lay.split(name)
        upscale.write_dataset(out[name], ds)
    _write_csv(
        lay.dataset / "drops.csv", ["total", "kept", "small_drawdown", "failed_members"],
        [[stats.total, stats.kept, stats.small_drawdown, " ".join(map(str, stats.failed_members))]],
    )
    log.info("dataset: %d/%d/%d rows, %d dropped", len(train), len(val), len(test), stats.small_drawdown)
    return out


def load_split(deck: RunDeck, name: str) -> upscale.Dataset:
    path = Layout(deck.output_dir).split(name)
    _require(path, "dataset", deck, f"{name} dataset")
    return upscale.read_dataset(path)


def cmd_train(deck: RunDeck) -> Path:
    """Architecture search on the dataset; writes the best model and diagnostics."""
    lay = Layout(deck.output_dir)
    train, val = load_split(deck, "train"), load_split(deck, "val")
    if len(train) == 0 or len(val) == 0:
        raise upscale.DatasetError("train and validation splits must both be non-empty; enlarge the ensemble")
    res = hyperparameter_search(train.x, train.y, val.x, val.y, deck.search or None, deck.train)
    model = WellIndexNet(res.result.net, res.result.scaler, deck.features)
    save_model(lay.model, model)
    table = res.table()
    _write_csv(lay.root / "search.csv", table[0], [[_fmt(v) for v in row] for row in table[1:]])
    h = res.result.history
    _write_csv(
        lay.root / "history.csv", ["epoch", "train_mse", "val_mse"],
        [[i, repr(float(a)), repr(float(b))] for i, (a, b) in enumerate(zip(h["train"], h["val"]))],
    )
    write_sensitivity(deck, model, lay.root / "sensitivity.csv")
    return lay.model


def write_sensitivity(deck: RunDeck, model: WellIndexNet, path: Path) -> np.ndarray:
    """Mean sweep range per input, scaled output units."""
    ranges = mean_ranges(model.net, deck.sensitivity_draws, deck.sensitivity_seed)
    _write_csv(path, ["feature", "mean_range"], [[n, repr(float(r))] for n, r in zip(model.spec.names, ranges)])
    return ranges


def load_trained(deck: RunDeck) -> WellIndexNet:
    path = Layout(deck.output_dir).model
    _require(path, "train", deck, "trained model")
    return load_model(path)


# ---------------------------------------------------------------------------
# simulate


def benchmark_grid(deck: RunDeck, scn: Scenario) -> grid.CartesianGrid:
    sim = deck.simulation
    b = sim.benchmark
    return grid.two_zone_grid(
        sim.domain, b.fine_size, b.outer_size, b.near_extent, scn.layer_heights,
        pore_volume_multiplier_boundary=sim.boundary_pv_multiplier, quarter=sim.quarter,
    )


def coarse_grid(deck: RunDeck, scn: Scenario, size: float) -> grid.CartesianGrid:
    sim = deck.simulation
    return grid.uniform_well_grid(
        sim.domain, size, scn.layer_heights,
        pore_volume_multiplier_boundary=sim.boundary_pv_multiplier, quarter=sim.quarter,
    )


def simulate_case(deck: RunDeck, scn: Scenario, well_model: str, size, model: WellIndexNet | None = None):
    """Run one scenario; returns the simulator report."""
    if size == FINE:
        if well_model != "peaceman":
            raise ValueError("the fine benchmark uses the Peaceman well model")
        g = benchmark_grid(deck, scn)
    else:
        g = coarse_grid(deck, scn, float(size))
    wm = NNWellModel(model) if well_model == "nn" else None
    flow, state0 = cartesian_case(scn, g, well_model=wm)
    return run_simulation(flow, state0, np.asarray(deck.report_times), deck.sim_config)


def write_report(path: Path, rep) -> None:
    rate = rep.conn_rate.sum(axis=1)
    rows = []
    for i, t in enumerate(rep.times):
        rows.append([
            repr(float(t)), repr(float(t / units.DAY)), repr(float(rep.bhp[i, 0] / units.BAR)),
            repr(float(rate[i])), "", "",
        ])
    if rows:
        rows[-1][4] = int(sum(rep.newton_iterations))
        rows[-1][5] = int(rep.clamp_events)
    _write_csv(path, REPORT_COLUMNS, rows)


def read_report(path) -> dict[str, np.ndarray]:
    """Columns of a report file; totals are only in the last row."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = list(reader)
    if tuple(header) != REPORT_COLUMNS:
        raise ValueError(f"{path}: unexpected report columns {header}")
    out = {}
    for j, name in enumerate(header[:4]):
        out[name] = np.array([float(r[j]) for r in rows])
    out["newton_iterations"] = int(rows[-1][4]) if rows and rows[-1][4] else 0
    out["clamp_events"] = int(rows[-1][5]) if rows and rows[-1][5] else 0
    return out


def _job(args):
    deck, scn, well_model, size, model = args
    rep = simulate_case(deck, scn, well_model, size, model)
    return rep


def plan_runs(deck: RunDeck, well_model: str = "all", grid_size="all", scenarios=None) -> list[tuple]:
    """(scenario, well_model, size) triples selected by the flags."""
    models = WELL_MODELS if well_model == "all" else (well_model,)
    for m in models:
        if m not in WELL_MODELS:
            raise ValueError(f"unknown well model {m!r}; expected one of {WELL_MODELS} or 'all'")
    if grid_size == "all":
        sizes = [FINE] + list(deck.simulation.cell_sizes)
    elif grid_size == FINE:
        sizes = [FINE]
    else:
        sizes = [float(grid_size)]
    names = [s.name for s in deck.simulation.scenarios]
    chosen = names if not scenarios else list(scenarios)
    unknown = set(chosen) - set(names)
    if unknown:
        raise ValueError(f"unknown scenarios {sorted(unknown)}; deck has {names}")
    runs = []
    for scn in deck.simulation.scenarios:
        if scn.name not in chosen:
            continue
        for m in models:
            for size in sizes:
                if size == FINE and m != "peaceman":
                    continue
                runs.append((scn, m, size))
    if not runs:
        raise ValueError("nothing to simulate: the fine benchmark grid only runs with --well-model peaceman")
    return runs


def cmd_simulate(deck: RunDeck, well_model: str = "all", grid_size="all", scenarios=None,
                 workers: int = 1) -> list[Path]:
    """Coarse (and fine benchmark) runs of the deck scenarios; one report file each.

    Wall-clock times go to ``reports/timings.csv`` so the report files
    themselves are reproducible byte for byte.
    """
    lay = Layout(deck.output_dir)
    runs = plan_runs(deck, well_model, grid_size, scenarios)
    model = load_trained(deck) if any(m == "nn" for _, m, _ in runs) else None
    jobs = [(deck, scn, m, size, model if m == "nn" else None) for scn, m, size in runs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_job, jobs))
    else:
        reports = [_job(j) for j in jobs]
    paths = []
    timings = read_timings(lay.timings)
    for (scn, m, size), rep in zip(runs, reports):
        path = lay.report(scn.name, m, size)
        write_report(path, rep)
        timings[(scn.name, m, size_label(size))] = rep.wall_time
        paths.append(path)
        log.info("%s: final bhp %.2f bar in %.1f s", path.name, rep.bhp[-1, 0] / units.BAR, rep.wall_time)
    _write_csv(
        lay.timings, ["scenario", "well_model", "cell_size", "runtime_s"],
        [[s, m, z, repr(float(t))] for (s, m, z), t in sorted(timings.items())],
    )
    return paths


def read_timings(path: Path) -> dict:
    if not path.exists():
        return {}
    with open(path, newline="") as f:
        return {(r["scenario"], r["well_model"], r["cell_size"]): float(r["runtime_s"]) for r in csv.DictReader(f)}


def sensitivity_curves(deck: RunDeck, model: WellIndexNet) -> dict[str, np.ndarray]:
    return {
        name: sensitivity(model.net, i, deck.sensitivity_draws, deck.sensitivity_seed)
        for i, name in enumerate(model.spec.names)
    }
