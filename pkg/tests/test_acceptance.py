"""Acceptance criteria 1 to 10, each printed as one PASS/FAIL line.

The family pipelines run the shipped decks with smaller ensembles, a single
network architecture and, for the CO2 families, only the coarsest grid, so
that each family finishes in a few minutes on one CPU.
"""

import filecmp

import numpy as np
import pytest

import test_cli
import test_nn
import test_sim
import test_upscale
import test_wells
from conftest import record_acceptance
from nearwell import ensemble, nn, units, upscale, wells
from nearwell.cli import FINE, Layout, cmd_compare, cmd_dataset, cmd_ensemble, cmd_simulate, cmd_train
from nearwell.cli.commands import load_split, load_trained, read_report
from nearwell.cli.deck import load_deck, shipped_deck_path

ONE_ARCH = {"depth": [3], "width": [20], "activation": ["softplus"], "lr": [3.0e-3]}

REDUCED = {
    "h2o": {
        "ensemble": {"n_members": 100},
        "train": {"batch_size": 32, "max_epochs": 1500, "patience": 200, "search": ONE_ARCH},
    },
    "co2_2d": {
        "ensemble": {"n_members": 80},
        "train": {"batch_size": 32, "max_epochs": 1500, "patience": 200, "search": ONE_ARCH},
        "simulation": {"cell_sizes": [100]},
    },
    "co2_3d": {
        "ensemble": {"n_members": 40},
        "train": {"batch_size": 64, "max_epochs": 400, "patience": 100, "search": ONE_ARCH},
        "simulation": {"cell_sizes": [90]},
    },
}


def run_family(family, root):
    deck = load_deck(shipped_deck_path(family), out_dir=root, overrides=REDUCED[family])
    cmd_ensemble(deck)
    cmd_dataset(deck)
    cmd_train(deck)
    cmd_simulate(deck)
    return deck, cmd_compare(deck)


@pytest.fixture(scope="module")
def h2o(tmp_path_factory):
    return run_family("h2o", tmp_path_factory.mktemp("h2o"))


@pytest.fixture(scope="module")
def co2_2d(tmp_path_factory):
    return run_family("co2_2d", tmp_path_factory.mktemp("co2_2d"))


@pytest.fixture(scope="module")
def co2_3d(tmp_path_factory):
    return run_family("co2_3d", tmp_path_factory.mktemp("co2_3d"))


def scaled_val_mse(deck) -> float:
    model = load_trained(deck)
    val = load_split(deck, "val")
    return nn.loss_mse(model.net, model.scaler.scale_x(val.x), model.scaler.scale_y(val.y))


def ordinal_errors(deck, report, size):
    rows = []
    for scn in deck.simulation.scenarios:
        pm = report.error(scn.name, "peaceman", size).mean_error / units.BAR
        ml = report.error(scn.name, "nn", size).mean_error / units.BAR
        rows.append((scn.name, pm, ml))
    return rows


def test_criterion_01_radial_log_profile():
    err = test_sim.thiem_profile_error(50)
    ok = err <= 5e-3
    record_acceptance(1, ok, f"max relative pressure-drop error {err:.2e} (limit 5e-3)")
    assert ok


def test_criterion_02_equivalent_radius():
    ratio = test_wells.fine_grid_equivalent_radius()
    ours = wells.equivalent_radius(1.0, 1.0, 1.0, 1.0)
    ok = abs(ratio / 0.198 - 1) <= 0.02 and abs(ours / ratio - 1) <= 0.02
    record_acceptance(2, ok, f"oracle r_e/dx {ratio:.5f}, equivalent_radius {ours:.5f} (0.198 +- 2%)")
    assert ok


def test_criterion_03_peaceman_grid_independence(h2o):
    deck, _ = h2o
    lay = Layout(deck.output_dir)
    worst = 0.0
    for scn in deck.simulation.scenarios:
        fine = read_report(lay.report(scn.name, "peaceman", FINE))["bhp_bar"]
        for size in deck.simulation.cell_sizes:
            coarse = read_report(lay.report(scn.name, "peaceman", size))["bhp_bar"]
            worst = max(worst, float(np.max(np.abs(coarse - fine) / fine)))
    ok = worst <= 0.01
    record_acceptance(3, ok, f"largest relative bhp deviation {worst:.2e} over 3 scenarios x 3 sizes (limit 1e-2)")
    assert ok


def test_criterion_04_h2o_network_fidelity(h2o):
    deck, report = h2o
    errs = [report.error(s.name, "nn", z) for s in deck.simulation.scenarios for z in deck.simulation.cell_sizes]
    mean = max(e.mean_error for e in errs) / units.BAR
    mx = max(e.max_error for e in errs) / units.BAR
    ok = mean <= 0.5 and mx <= 1.5
    record_acceptance(4, ok, f"worst mean |dbhp| {mean:.3f} bar (<= 0.5), worst max {mx:.3f} bar (<= 1.5)")
    assert ok


def test_criterion_05_co2_2d_ordinal(co2_2d):
    deck, report = co2_2d
    rows = ordinal_errors(deck, report, max(deck.simulation.cell_sizes))
    ok = all(ml <= pm / 3 and ml <= 3.0 for _, pm, ml in rows)
    detail = ", ".join(f"{n}: nn {ml:.2f} vs peaceman {pm:.2f} bar" for n, pm, ml in rows)
    record_acceptance(5, ok, f"coarsest grid mean errors {detail} (nn <= peaceman/3 and <= 3 bar)")
    assert ok


def test_criterion_06_co2_3d_ordinal(co2_3d):
    deck, report = co2_3d
    rows = ordinal_errors(deck, report, max(deck.simulation.cell_sizes))
    ok = all(ml <= pm / 3 for _, pm, ml in rows)
    detail = ", ".join(f"{n}: nn {ml:.2f} vs peaceman {pm:.2f} bar" for n, pm, ml in rows)
    record_acceptance(6, ok, f"coarsest grid mean errors {detail} (nn <= peaceman/3)")
    assert ok


def test_criterion_07_transient_well_index(co2_3d):
    deck, _ = co2_3d
    rec = ensemble.MemberRecord.load(ensemble.member_path(Layout(deck.output_dir).members, 0))
    size = float(np.median(deck.dataset_sizes))
    ds, _ = upscale.member_samples(rec, deck.features, [size])
    times = np.unique(ds.time)
    # the member's total index: sum over its layer connections
    wi = np.array([ds.wi[ds.time == t].sum() for t in times])
    at = lambda t: np.interp(np.log(t), np.log(times), wi)
    total = deck.report_times[-1]
    drift = abs(wi[-1] - at(total / 3)) / wi[-1]
    early = at(units.DAY) / wi[-1]
    ok = drift < 0.05 and early < 0.9
    record_acceptance(7, ok, f"member 0 at {size:g} m: |WI(T)-WI(T/3)|/WI(T) {drift:.3f} (< 0.05), "
                             f"WI(1 day)/WI(T) {early:.3f} (< 0.9)")
    assert ok


def test_criterion_08_expert_feature_dominates(co2_3d):
    deck, _ = co2_3d
    model = load_trained(deck)
    ranges = nn.mean_ranges(model.net, 20, deck.sensitivity_seed)
    names = model.spec.names
    top = names[int(np.argmax(ranges))]
    runner_up = sorted(ranges)[-2]
    ok = top == "expert"
    record_acceptance(8, ok, f"largest mean sweep range: {top} {ranges.max():.3f} (next {runner_up:.3f})")
    assert ok


def test_criterion_09_property_suites(tmp_path):
    suites = {
        "mass balance": lambda: test_sim.test_two_phase_mass_balance_and_newton_bound(),
        "residual Jacobian": lambda: [test_sim.test_jacobian_matches_finite_differences(c) for c in range(4)],
        "network gradient": lambda: [test_nn.test_gradients_match_finite_differences(s) for s in range(10)],
        "scaler round trip": test_nn.test_scaler_round_trip,
        "overlap convexity": test_upscale.test_overlap_weights_convex,
        "determinism": lambda: pipeline_is_byte_identical(tmp_path),
    }
    failed = []
    for name, check in suites.items():
        try:
            check()
        except AssertionError:
            failed.append(name)
    ok = not failed
    record_acceptance(9, ok, f"{len(suites) - len(failed)}/{len(suites)} property suites green"
                             + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert ok


def pipeline_is_byte_identical(root):
    runs = []
    for name in ("a", "b"):
        (root / name).mkdir()
        runs.append(test_cli.run_pipeline(root / name))
    a, b = runs
    # wall-clock times are the only artifacts allowed to differ
    files = [p for p in sorted(a.rglob("*")) if p.is_file() and p.name not in ("timings.csv", "runtimes.csv")]
    assert len(files) > 20
    for p in files:
        assert filecmp.cmp(p, b / p.relative_to(a), shallow=False), p.name


def test_criterion_10_validation_loss(h2o, co2_2d):
    h, c = scaled_val_mse(h2o[0]), scaled_val_mse(co2_2d[0])
    ok = h <= 1e-3 and c <= 5e-3
    record_acceptance(10, ok, f"scaled validation MSE h2o {h:.2e} (<= 1e-3), co2_2d {c:.2e} (<= 5e-3)")
    assert ok
