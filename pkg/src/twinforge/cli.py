"""Command line entry point: ``twinforge run`` and ``twinforge compare``."""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, TwinForgeError
from .harness.config import help_text, load_config
from .harness.metrics import compare_curves, format_report, read_curve

EXIT_OK, EXIT_RUN, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twinforge", description="Twin-assisted RL experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser(
        "run",
        help="run an experiment config",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="config keys and defaults:\n" + help_text()
        + "\n\nTWINFORGE_THREADS caps the number of seeds run in parallel (default 1).",
    )
    run.add_argument("config", help="key=value experiment file")
    run.add_argument("--output-dir", help="override output_dir")
    run.add_argument("--seeds", help="comma-separated seeds, overrides the config")
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    cmp = sub.add_parser("compare", help="rank learning curves")
    cmp.add_argument("criterion", help="auc | episodes_to_fraction(F)")
    cmp.add_argument("csv", nargs="+", help="metrics_seed*.csv or summary.csv files")
    return p


def _run(args) -> int:
    from .harness.experiment import run_experiment

    overrides = list(args.override)
    if args.seeds:
        overrides.append(f"seeds={args.seeds}")
    if args.output_dir:
        overrides.append(f"output_dir={args.output_dir}")
    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as e:
        print(f"{e.code}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"cannot read config: {e}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = run_experiment(cfg)
    except ConfigError as e:
        print(f"{e.code}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, TwinForgeError) as e:
        print(f"run failed: {e}", file=sys.stderr)
        return EXIT_RUN
    failed = [r for r in table.results if r.failed]
    for r in failed:
        print(f"seed {r.seed} failed: {r.error}", file=sys.stderr)
    print(f"wrote {len(table.results) - len(failed)} seed file(s) and summary.csv to {cfg.output_dir}")
    return EXIT_RUN if failed else EXIT_OK


def _compare(args) -> int:
    try:
        curves = {path: read_curve(path) for path in args.csv}
        ranked = compare_curves(curves, args.criterion)
    except ConfigError as e:
        print(f"{e.code}: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, IndexError) as e:
        print(f"cannot read curves: {e}", file=sys.stderr)
        return EXIT_RUN
    print(format_report(args.criterion, ranked))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _run(args)
    return _compare(args)


if __name__ == "__main__":
    sys.exit(main())
