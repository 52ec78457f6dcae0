import filecmp
from pathlib import Path

import numpy as np
import pytest
import yaml
from numpy.testing import assert_allclose, assert_array_equal

from nearwell import units, upscale
from nearwell.cli import FINE, Layout, main
from nearwell.cli.commands import read_report, simulate_case
from nearwell.cli.compare import bhp_errors, build_comparison, load_comparison, time_mean
from nearwell.cli.deck import DeckError, load_deck, shipped_deck_path

TINY = {
    "version": 1,
    "name": "tiny",
    "family": "h2o",
    "well": {"r_w": 0.25, "rate_m3_per_day": 60},
    "schedule": {"total_days": 1, "n_reports": 8, "first_report_s": 60},
    "ensemble": {
        "n_members": 6, "seed": 1, "p_init_bar": [60, 100], "k": [1.0e-13, 1.0e-12], "h": [5, 15],
        "r_outer": 100, "n_r": 20,
    },
    "dataset": {"cell_sizes": [30, 50], "split": [0.6, 0.2, 0.2], "seed": 2},
    "train": {
        "seed": 3, "batch_size": 16, "max_epochs": 40, "patience": 10,
        "search": {"depth": [1], "width": [6], "activation": ["tanh"], "lr": [1.0e-2]},
        "sensitivity": {"n_draws": 3, "seed": 4},
    },
    "simulation": {
        "domain": 250, "cell_sizes": [50],
        "benchmark": {"fine_size": 10, "outer_size": 25, "near_extent": 30},
        "scenarios": [{"name": "a", "p_init_bar": 80, "k": [5.0e-13], "h": 10}],
    },
    "output": {"dir": "out"},
}


def write_deck(path: Path, data=TINY) -> Path:
    path.write_text(yaml.safe_dump(data, sort_keys=False))
    return path


def run_pipeline(root: Path) -> Path:
    deck = write_deck(root / "tiny.yaml")
    out = root / "out"
    for cmd in ("ensemble", "dataset", "train", "simulate", "compare"):
        assert main([cmd, "--deck", str(deck), "--out", str(out)]) == 0, cmd
    return out


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    return run_pipeline(tmp_path_factory.mktemp("a")), run_pipeline(tmp_path_factory.mktemp("b"))


def test_pipeline_outputs_exist(two_runs):
    lay = Layout(two_runs[0])
    for path in (lay.split("train"), lay.split("val"), lay.split("test"), lay.model,
                 lay.report("a", "peaceman", FINE), lay.report("a", "peaceman", 50.0), lay.report("a", "nn", 50.0),
                 lay.compare / "errors.csv", lay.compare / "bhp_a.svg", lay.compare / "bhp_a.csv",
                 lay.compare / "wi_time.svg", lay.compare / "sensitivity.svg"):
        assert path.exists(), path
    assert len(list(lay.members.glob("*.npz"))) == 6


def test_pipeline_is_byte_identical(two_runs):
    a, b = (Layout(r) for r in two_runs)
    files = [a.split("train"), a.split("val"), a.split("test"), a.model,
             *sorted(a.reports.glob("*__*.csv")), *sorted(a.members.glob("*.npz")),
             a.compare / "errors.csv", a.compare / "bhp_a.svg"]
    for f in files:
        twin = b.root / f.relative_to(a.root)
        assert filecmp.cmp(f, twin, shallow=False), f.name


def test_emitted_csvs_parse_back(two_runs):
    lay = Layout(two_runs[0])
    report = load_comparison(lay.root)
    rep = read_report(lay.report("a", "nn", 50.0))
    assert rep["time_s"].size == 8 and rep["newton_iterations"] > 0
    assert_allclose(report.series[("a", "nn", "50")], rep["bhp_bar"] * units.BAR)
    header = (lay.compare / "errors.csv").read_text().splitlines()[0]
    assert header.startswith("scenario,well_model,cell_size,mean_error_bar")
    ds = upscale.read_dataset(lay.split("train"))
    assert ds.spec.names == ("p", "k", "h", "r_e") and len(ds) > 0
    e = report.error("a", "peaceman", 50)
    assert e.mean_error >= 0 and e.max_error >= e.mean_error


def test_commands_skip_finished_members(two_runs, capsys):
    out = two_runs[0]
    lay = Layout(out)
    before = {p.name: p.stat().st_mtime_ns for p in lay.members.glob("*.npz")}
    assert main(["ensemble", "--deck", str(out.parent / "tiny.yaml"), "--out", str(out)]) == 0
    assert {p.name: p.stat().st_mtime_ns for p in lay.members.glob("*.npz")} == before


def test_missing_artifacts_name_the_prerequisite(tmp_path, capsys):
    deck = write_deck(tmp_path / "tiny.yaml")
    for cmd, needed in (("dataset", "nearwell ensemble"), ("train", "nearwell dataset"),
                        ("compare", "nearwell simulate")):
        assert main([cmd, "--deck", str(deck), "--out", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert needed in err, (cmd, err)
    assert main(["simulate", "--deck", str(deck), "--out", str(tmp_path / "o"), "--well-model", "nn"]) == 2
    assert "nearwell train" in capsys.readouterr().err


@pytest.mark.parametrize("change, message", [
    ({"ensemble": {"colour": 1}}, "unknown field 'ensemble.colour' (line"),
    ({"ensemble": {"n_members": "many"}}, "ensemble.n_members"),
    ({"version": 7}, "version 7"),
    ({"family": "oil"}, "unknown family"),
    ({"simulation": {"scenarios": [{"name": "a", "p_init_bar": 80, "k": [1e-13, 1e-13], "h": 5}]}}, "2 values"),
])
def test_deck_validation(tmp_path, change, message):
    from nearwell.cli.deck import merge
    path = write_deck(tmp_path / "d.yaml", merge(TINY, change))
    with pytest.raises(DeckError) as info:
        load_deck(path)
    assert message in str(info.value)


def test_unknown_key_reports_its_line(tmp_path):
    text = yaml.safe_dump(TINY, sort_keys=False).replace("  n_members: 6\n", "  n_members: 6\n  bogus: 2\n")
    path = tmp_path / "d.yaml"
    path.write_text(text)
    line = text.splitlines().index("  bogus: 2") + 1
    with pytest.raises(DeckError, match=f"line {line}"):
        load_deck(path)


def test_missing_required_field(tmp_path):
    data = {k: v for k, v in TINY.items() if k != "ensemble"}
    with pytest.raises(DeckError, match="missing required field 'ensemble'"):
        load_deck(write_deck(tmp_path / "d.yaml", data))


def test_shipped_decks_load():
    for name, n_members, sizes in (("h2o", 100, (27, 50, 100)), ("co2_2d", 150, (27, 50, 100)),
                                   ("co2_3d", 200, (27, 45, 90))):
        deck = load_deck(shipped_deck_path(name))
        assert deck.ensemble.n_members == n_members
        assert tuple(deck.simulation.cell_sizes) == sizes
        assert len(deck.simulation.scenarios) == 3
    deck = load_deck(shipped_deck_path("h2o"))
    assert deck.ensemble.ranges["k"] == (1e-14, 1e-12)
    assert deck.ensemble.ranges["p_init"] == (units.bar(50), units.bar(150))
    with pytest.raises(DeckError):
        shipped_deck_path("nope")


def test_compare_of_identical_series_is_zero():
    t = np.geomspace(60, 864000, 30)
    bhp = 1e7 + 1e5 * np.log(t)
    assert bhp_errors(t, bhp, bhp) == (0.0, 0.0, 0.0)
    rep = {"time_s": t, "bhp_bar": bhp / units.BAR}
    report = build_comparison({("x", "peaceman", FINE): rep, ("x", "nn", "50"): rep})
    e = report.error("x", "nn", 50)
    assert (e.mean_error, e.max_error, e.time_avg_error) == (0.0, 0.0, 0.0)


def test_error_metrics():
    t = np.array([0.0, 1.0, 3.0])
    mean, mx, avg = bhp_errors(t, [1.0, 2.0, 5.0], [1.0, 1.0, 1.0])
    assert mean == pytest.approx(5 / 3) and mx == 4.0
    assert avg == pytest.approx((0.5 * 1 + 0.5 * (1 + 4) * 2) / 3)
    assert time_mean(np.array([2.0]), np.array([7.0])) == 7.0
    with pytest.raises(ValueError):
        bhp_errors(t, [1.0, 2.0], [1.0, 1.0, 1.0])


def test_comparison_needs_the_benchmark():
    t = np.array([1.0, 2.0])
    rep = {"time_s": t, "bhp_bar": np.array([80.0, 81.0])}
    with pytest.raises(FileNotFoundError, match="--grid-size fine"):
        build_comparison({("x", "nn", "50"): rep})


def test_well_models_share_the_initial_state(tmp_path, two_runs):
    deck = load_deck(write_deck(tmp_path / "tiny.yaml"))
    from nearwell.nn import load_model
    model = load_model(Layout(two_runs[0]).model)
    scn = deck.simulation.scenarios[0]
    from nearwell.cli.commands import coarse_grid
    from nearwell.nnwell import NNWellModel
    from nearwell.scenario import cartesian_case
    g = coarse_grid(deck, scn, 50.0)
    pm, s_pm = cartesian_case(scn, g)
    nn_flow, s_nn = cartesian_case(scn, g, well_model=NNWellModel(model))
    assert_array_equal(s_pm.p, s_nn.p)
    assert_array_equal(s_pm.s_g, s_nn.s_g)
    assert_array_equal(s_pm.bhp, s_nn.bhp)
    rep = simulate_case(deck, scn, "peaceman", 50.0)
    assert rep.bhp.shape == (8, 1)
    with pytest.raises(ValueError):
        simulate_case(deck, scn, "nn", FINE, model)
