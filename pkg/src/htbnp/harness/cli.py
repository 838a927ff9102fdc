"""Command line entry point ``ht-bnp``.

Exit codes: 0 success, 2 configuration (or usage) error, 3 numerical failure.
"""

import argparse
import os
import sys

from ..exceptions import ConfigError, DomainError, NumericalFailure
from .artifacts import RunWriter
from .config import EXPERIMENTS, load_config
from .experiments import run
from .plotting import KINDS, PlotError, emit_plot

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_CONFIG)


def build_parser():
    parser = _Parser(prog="ht-bnp", description="Heavy-tailed series prior experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="YAML config file")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--paper-scale", action="store_true", help="use the published chain lengths")
        p.add_argument("--out", help="output directory (default out/<experiment>)")
    v = sub.add_parser("validate", help="validate a config file and print the resolved config")
    v.add_argument("--config", required=True)
    pl = sub.add_parser("plot", help="render a CSV table to SVG")
    pl.add_argument("table", help="path to a CSV table written by an experiment")
    pl.add_argument("--kind", required=True, choices=KINDS)
    pl.add_argument("--out", help="SVG path (default next to the table)")
    pl.add_argument("--x")
    pl.add_argument("--y")
    pl.add_argument("--lower", default="lower")
    pl.add_argument("--upper", default="upper")
    pl.add_argument("--group")
    return parser


def _run_experiment(args):
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.paper_scale:
        overrides["paper_scale"] = True
    cfg = load_config(args.config, overrides)
    if cfg["experiment"] != args.command:
        raise ConfigError("experiment", f"config is for {cfg['experiment']!r}, not {args.command!r}")
    out = args.out or cfg.get("output_dir") or os.path.join("out", cfg["experiment"])
    writer = RunWriter(out, cfg)
    try:
        run(cfg, writer)
    except (NumericalFailure, FloatingPointError) as exc:
        writer.fail(f"{type(exc).__name__}: {exc}")
        raise NumericalFailure(f"{cfg['experiment']}: {exc}") from exc
    except Exception as exc:
        writer.fail(f"{type(exc).__name__}: {exc}")
        raise
    writer.finish()
    print(writer.dir)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            import yaml
            cfg = load_config(args.config)
            print(yaml.safe_dump(cfg, sort_keys=True), end="")
        elif args.command == "plot":
            path = emit_plot(args.table, args.kind, args.out, args.x, args.y, args.lower, args.upper, args.group)
            print(path)
        else:
            _run_experiment(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PlotError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
