"""Command-line interface: run scenarios, render plots, list built-ins.

Exit codes: 0 when every verdict passes, 1 when any check fails or an
experiment errors, 2 for configuration problems.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigurationError, WavescatError
from .runner import ArtifactIndex, run_scenario
from .scenario import EXPERIMENT_TAGS

_BUILTIN_SYMBOLS = ("laplacian", "wave", "dirac1d", "polynomial")
_BUILTIN_MEDIA = ("constant", "bump", "rational", "wave_block", "file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wavescat",
        description="Scenario runner for wave-operator and Schatten-class "
                    "diagnostics on periodic grids")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log progress at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute a scenario config")
    run_p.add_argument("config", help="path to the scenario file")
    run_p.add_argument("--out", default=None, help="output directory")
    run_p.add_argument("--jobs", type=int, default=1,
                       help="concurrent experiments")
    run_p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")

    plot_p = sub.add_parser("plot", help="render plots for a manifest")
    plot_p.add_argument("index", help="path to manifest.json")

    sub.add_parser("list-builtins", help="print built-in names")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list-builtins":
        print("symbols:", ", ".join(_BUILTIN_SYMBOLS))
        print("media:", ", ".join(_BUILTIN_MEDIA))
        print("experiments:", ", ".join(EXPERIMENT_TAGS))
        return 0

    if args.command == "run":
        try:
            index = run_scenario(args.config, out_dir=args.out,
                                 jobs=args.jobs, seed=args.seed)
        except ConfigurationError as exc:
            print(f"configuration error: {exc}", file=sys.stderr)
            return 2
        for name, verdict in sorted(index.verdicts.items()):
            print(f"{verdict.upper():5s} {name}")
        print(f"manifest: {index.out_dir}/manifest.json")
        return 0 if index.all_pass else 1

    if args.command == "plot":
        from .plots import emit_plots
        try:
            index = ArtifactIndex.load(args.index)
        except (OSError, KeyError, ValueError) as exc:
            print(f"cannot load manifest: {exc}", file=sys.stderr)
            return 2
        produced = emit_plots(index)
        for name in produced:
            print(name)
        return 0

    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
