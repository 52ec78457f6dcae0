"""Bottom-hole pressure errors of coarse runs against the fine benchmark."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from nearwell import units, upscale
from nearwell.cli import plots
from nearwell.cli.commands import (
    FINE, Layout, MissingArtifactError, _write_csv, read_report, read_timings, sensitivity_curves,
)
from nearwell.nn import load_model
from nearwell.nnwell import nn_well_index

_REPORT = re.compile(r"^(?P<scenario>.+)__(?P<model>[a-z]+)__(?P<size>[^_]+)\.csv$")


def time_mean(t: np.ndarray, v: np.ndarray) -> float:
    """Time average of ``v`` over ``[t[0], t[-1]]`` by the trapezoid rule."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.size == 1:
        return float(v[0])
    return float(np.trapezoid(v, t) / (t[-1] - t[0]))


def bhp_errors(t, bhp, bhp_ref) -> tuple[float, float, float]:
    """(mean over report times, maximum, time average) of the absolute difference.

    The plain mean weights every report equally, so the densely reported
    early period counts as much as the late one; the trapezoid time average
    is dominated by the late period.
    """
    bhp, bhp_ref = np.asarray(bhp, dtype=float), np.asarray(bhp_ref, dtype=float)
    if bhp.shape != bhp_ref.shape:
        raise ValueError(f"series lengths differ: {bhp.shape} vs {bhp_ref.shape}")
    d = np.abs(bhp - bhp_ref)
    return float(d.mean()), float(d.max()), time_mean(t, d)


@dataclass
class SeriesError:
    scenario: str
    well_model: str
    cell_size: str
    mean_error: float  # Pa, mean over report times
    max_error: float  # Pa
    time_avg_error: float = float("nan")  # Pa, trapezoid time average
    runtime: float = float("nan")  # s


@dataclass
class ComparisonReport:
    """All report series of a deck and their errors against the benchmark."""

    times: np.ndarray  # s
    series: dict  # (scenario, model, size) -> bhp (Pa)
    errors: list = field(default_factory=list)  # of SeriesError

    def error(self, scenario: str, well_model: str, cell_size) -> SeriesError:
        label = cell_size if isinstance(cell_size, str) else f"{float(cell_size):g}"
        for e in self.errors:
            if (e.scenario, e.well_model, e.cell_size) == (scenario, well_model, label):
                return e
        raise KeyError((scenario, well_model, label))

    @property
    def scenarios(self) -> list[str]:
        return sorted({k[0] for k in self.series})


def _size_key(label: str):
    return (0, 0.0) if label == FINE else (1, float(label))


def collect_reports(reports_dir: Path) -> dict:
    """Parse every report file in ``reports_dir`` keyed by (scenario, model, size label)."""
    out = {}
    for path in sorted(Path(reports_dir).glob("*.csv")):
        m = _REPORT.match(path.name)
        if m is None:
            continue
        out[(m["scenario"], m["model"], m["size"])] = read_report(path)
    return out


def build_comparison(reports: dict, timings: dict | None = None) -> ComparisonReport:
    """Errors of every non-benchmark series against its scenario's benchmark."""
    timings = timings or {}
    if not reports:
        raise MissingArtifactError("no report files; run `nearwell simulate` first")
    times = None
    series = {}
    for key, rep in reports.items():
        if times is None:
            times = rep["time_s"]
        elif rep["time_s"].shape != times.shape or not np.allclose(rep["time_s"], times, rtol=1e-12):
            raise ValueError(f"report {key} uses different report times")
        series[key] = rep["bhp_bar"] * units.BAR
    errors = []
    for key in sorted(series, key=lambda k: (k[0], k[1], _size_key(k[2]))):
        scn, model, size = key
        ref = series.get((scn, "peaceman", FINE))
        if ref is None:
            raise MissingArtifactError(
                f"benchmark series for scenario {scn!r} is missing; run `nearwell simulate --grid-size fine`"
            )
        if size == FINE:
            continue
        mean, mx, avg = bhp_errors(times, series[key], ref)
        errors.append(SeriesError(scn, model, size, mean, mx, avg, timings.get(key, float("nan"))))
    return ComparisonReport(times, series, errors)


def load_comparison(root: Path) -> ComparisonReport:
    lay = Layout(Path(root))
    return build_comparison(collect_reports(lay.reports), read_timings(lay.timings))


def write_comparison(report: ComparisonReport, out_dir: Path) -> dict[str, Path]:
    """``errors.csv`` (bar), ``runtimes.csv`` and one series table per scenario."""
    out_dir = Path(out_dir)
    paths = {"errors": out_dir / "errors.csv", "runtimes": out_dir / "runtimes.csv"}
    _write_csv(
        paths["errors"], ["scenario", "well_model", "cell_size", "mean_error_bar", "max_error_bar", "time_avg_error_bar"],
        [[e.scenario, e.well_model, e.cell_size, repr(e.mean_error / units.BAR), repr(e.max_error / units.BAR),
          repr(e.time_avg_error / units.BAR)] for e in report.errors],
    )
    _write_csv(
        paths["runtimes"], ["scenario", "well_model", "cell_size", "runtime_s"],
        [[e.scenario, e.well_model, e.cell_size, repr(e.runtime)] for e in report.errors],
    )
    for scn in report.scenarios:
        keys = sorted((k for k in report.series if k[0] == scn), key=lambda k: (_size_key(k[2])[0], k[1], _size_key(k[2])))
        header = ["time_days"] + [f"{m}_{s}_bar" for _, m, s in keys]
        rows = [
            [repr(float(t / units.DAY))] + [repr(float(report.series[k][i] / units.BAR)) for k in keys]
            for i, t in enumerate(report.times)
        ]
        paths[f"bhp_{scn}"] = out_dir / f"bhp_{scn}.csv"
        _write_csv(paths[f"bhp_{scn}"], header, rows)
    return paths


def cmd_compare(deck) -> ComparisonReport:
    """Errors, tables and plots from the report files of ``deck``.

    Well-index and sensitivity figures are added when the dataset and the
    trained model exist.
    """
    lay = Layout(deck.output_dir)
    if not lay.reports.exists():
        raise MissingArtifactError(
            f"no reports in {lay.reports}; run `nearwell simulate --deck {deck.source} --out {deck.output_dir}` first"
        )
    report = load_comparison(lay.root)
    write_comparison(report, lay.compare)
    for scn in report.scenarios:
        plots.plot_bhp(report, scn, lay.compare / f"bhp_{scn}.svg")
    model = load_model(lay.model) if lay.model.exists() else None
    test = lay.split("test")
    if test.exists():
        ds = upscale.read_dataset(test)
        if len(ds):
            member, size = int(ds.member.min()), float(ds.cell_size.min())
            sel = ds.subset((ds.member == member) & (ds.cell_size == size) & (ds.layer == 0))
            wi_nn = nn_well_index(model, sel.x)[0] if model is not None else None
            plots.plot_wi_time(sel.time, sel.wi, wi_nn, f"member {member}, {size:g} m cell",
                               lay.compare / "wi_time.svg")
    if model is not None:
        plots.plot_sensitivity(sensitivity_curves(deck, model), lay.compare / "sensitivity.svg")
    return report

