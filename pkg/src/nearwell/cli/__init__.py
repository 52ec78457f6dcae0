"""Command-line driver: ``nearwell <ensemble|dataset|train|simulate|compare>``."""

from __future__ import annotations

import argparse
import logging
import sys

from nearwell.cli.commands import (
    FINE, Layout, MissingArtifactError, cmd_dataset, cmd_ensemble, cmd_simulate, cmd_train,
)
from nearwell.cli.compare import ComparisonReport, cmd_compare
from nearwell.cli.deck import SHIPPED, DeckError, RunDeck, load_deck, shipped_deck_path

__all__ = [
    "ComparisonReport", "DeckError", "Layout", "MissingArtifactError", "RunDeck", "cmd_compare", "cmd_dataset",
    "cmd_ensemble", "cmd_simulate", "cmd_train", "load_deck", "main", "shipped_deck_path",
]

COMMANDS = ("ensemble", "dataset", "train", "simulate", "compare")


def _grid_size(text: str):
    if text in ("all", FINE):
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a cell size in metres, 'fine' or 'all', got {text!r}")
    if value <= 0:
        raise argparse.ArgumentTypeError("cell size must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nearwell", description="Machine-learned near-well models for coarse simulation.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--deck", required=True,
                   help=f"path to a run deck, or the name of a shipped deck ({', '.join(SHIPPED)})")
    p.add_argument("--out", help="output directory (default: the deck's output.dir)")
    p.add_argument("--workers", type=int, default=1, help="worker processes for ensemble and simulate")
    p.add_argument("--well-model", default="all", choices=("peaceman", "nn", "all"))
    p.add_argument("--grid-size", default="all", type=_grid_size,
                   help="coarse cell size in metres, 'fine' for the benchmark, or 'all'")
    p.add_argument("--scenario", action="append", help="restrict simulate to this scenario (repeatable)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def resolve_deck(name_or_path: str, out=None) -> RunDeck:
    path = shipped_deck_path(name_or_path) if name_or_path in SHIPPED else name_or_path
    return load_deck(path, out_dir=out)


def run(args: argparse.Namespace) -> int:
    deck = resolve_deck(args.deck, args.out)
    if args.command == "ensemble":
        paths = cmd_ensemble(deck, workers=args.workers)
        print(f"{len(paths)} members in {Layout(deck.output_dir).members}")
    elif args.command == "dataset":
        for name, path in cmd_dataset(deck).items():
            print(f"{name}: {path}")
    elif args.command == "train":
        print(f"model: {cmd_train(deck)}")
    elif args.command == "simulate":
        for path in cmd_simulate(deck, args.well_model, args.grid_size, args.scenario, workers=args.workers):
            print(f"report: {path}")
    else:
        report = cmd_compare(deck)
        print(f"{'scenario':<12}{'model':<10}{'size':>6}{'mean [bar]':>12}{'max [bar]':>12}{'t-avg [bar]':>12}")
        for e in report.errors:
            bar = [v / 1e5 for v in (e.mean_error, e.max_error, e.time_avg_error)]
            print(f"{e.scenario:<12}{e.well_model:<10}{e.cell_size:>6}" + "".join(f"{v:>12.3f}" for v in bar))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return run(args)
    except (DeckError, MissingArtifactError, FileNotFoundError, ValueError) as exc:
        print(f"nearwell {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
