"""Command-line driver.

    lassomlp synthetic-auc [--config PATH] [--out PATH] [--seeds 0,1,2] [--paper-scale] [--no-timing]
    lassomlp mnist-fs      [--data-dir DIR] ...
    lassomlp mnist-gen     [--data-dir DIR] ...
    lassomlp gradcheck     [--seeds 0]

Exit codes: 0 success, 1 gradient-check failure, 2 configuration error,
3 data-ingestion error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .data import DATA_DIR_ENV, IdxFormatError
from .experiments import (
    ConfigError,
    apply_overrides,
    default_config,
    load_mnist,
    parse_config_text,
    run_gradcheck,
    run_mnist_feature_selection,
    run_mnist_generalization,
    run_synthetic_auc,
    write_rows,
)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_DATA = 3

SUBCOMMANDS = {
    "synthetic-auc": ("synthetic-auc", run_synthetic_auc),
    "mnist-fs": ("mnist-feature-selection", run_mnist_feature_selection),
    "mnist-gen": ("mnist-generalization", run_mnist_generalization),
    "gradcheck": ("gradcheck", None),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="lassomlp", description="LassoMLP feature-selection experiments")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (experiment, _) in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run the {experiment} experiment")
        p.add_argument("--config", type=Path, help="key = value configuration file")
        p.add_argument("--seeds", help="comma-separated seed list (overrides config)")
        p.add_argument("--paper-scale", action="store_true", help="full grid and epoch counts")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key; repeatable")
        if name == "gradcheck":
            p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
            continue
        p.add_argument("--out", type=Path, help="CSV output path (default: stdout)")
        p.add_argument("--no-timing", action="store_true", help="write 0.0 in the wall_time_s column")
        if name.startswith("mnist"):
            p.add_argument("--data-dir", help=f"directory with MNIST IDX files (default: ${DATA_DIR_ENV})")
    return parser


def load_config(args):
    experiment, _ = SUBCOMMANDS[args.command]
    cfg = default_config(experiment, paper_scale=args.paper_scale)
    items = []
    if args.config is not None:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        items += parse_config_text(text)
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        items.append((key.strip(), value.strip()))
    if args.seeds:
        items.append(("seeds", args.seeds))
    if getattr(args, "data_dir", None):
        items.append(("data_dir", args.data_dir))
    return apply_overrides(cfg, items).validate()


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"lassomlp: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "gradcheck":
        report = run_gradcheck(cfg, corrupt=args.corrupt)
        print(report.format())
        return EXIT_OK if report.passed else EXIT_FAILED

    _, runner = SUBCOMMANDS[args.command]
    if args.command.startswith("mnist"):
        try:
            rows = runner(cfg, load_mnist(cfg))
        except (FileNotFoundError, IdxFormatError) as exc:
            print(f"lassomlp: data error: {exc}", file=sys.stderr)
            return EXIT_DATA
    else:
        rows = runner(cfg)
    timing = not args.no_timing
    if args.out is not None:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            write_rows(rows, fh, timing)
    else:
        write_rows(rows, sys.stdout, timing)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
