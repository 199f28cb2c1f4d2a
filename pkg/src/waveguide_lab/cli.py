"""Command-line entry point: ``waveguide-lab <kind> --config cfg.toml --out rows.csv``.

Exit codes: 0 success, 2 config error, 3 resource refusal, 4 numerical abort.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .sweep import KINDS, ConfigError, ExperimentConfig, ResourceRefusal, run, write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE, EXIT_ABORT = 0, 2, 3, 4

log = logging.getLogger("waveguide_lab")


def build_parser():
    # argparse exits with 2 on bad usage, which matches EXIT_CONFIG
    p = argparse.ArgumentParser(prog="waveguide-lab",
                description="Bilinear Strichartz and I-method experiments on R^m x T^n_lam.")
    sub = p.add_subparsers(dest="kind", required=True)
    for kind in KINDS:
        s = sub.add_parser(kind, help=f"run a {kind} experiment")
        s.add_argument("--config", required=True, help="TOML experiment config")
        s.add_argument("--out", help="CSV output path (default: config 'out' key)")
        s.add_argument("--seed", type=int, help="override the config seed (u64)")
        s.add_argument("--workers", type=int, help="override the worker count")
        s.add_argument("--timings", action="store_true",
                       help="fill the 'seconds' column (output is then not reproducible)")
        s.add_argument("--figures", action="store_true",
                       help="also render PNG figures next to the CSV (needs matplotlib)")
        s.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
        if cfg.kind != args.kind:
            raise ConfigError(f"config kind {cfg.kind!r} does not match subcommand {args.kind!r}")
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("seed must be an integer in [0, 2^64)")
            cfg.seed = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("workers must be positive")
            cfg.workers = args.workers
        out = args.out or cfg.out
        if not out:
            raise ConfigError("no output path: pass --out or set 'out' in the config")
        result = run(cfg, timings=args.timings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResourceRefusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_RESOURCE

    csv_path, side = write_outputs(result, cfg.kind, out)
    log.info("wrote %s and %s", csv_path, side)
    if args.figures:
        try:
            from .plotting import render_figures
        except ImportError as exc:
            print(f"figures skipped: {exc}", file=sys.stderr)
        else:
            for path in render_figures(cfg.kind, result.rows, csv_path):
                log.info("wrote %s", path)
    failed = result.summary.get("failed_rows", 0)
    if failed:
        print(f"{failed} row(s) failed; see the status column", file=sys.stderr)
    if result.aborted:
        return EXIT_ABORT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
