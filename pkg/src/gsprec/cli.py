"""Command line entry point: ``gsprec run | sweep | baseline``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ABLATIONS, ConfigError, load_config, load_grid
from .pipeline import StageError, atomic_write_text, run, run_baseline, sweep, sweep_to_csv


def _parser():
    p = argparse.ArgumentParser(prog="gsprec", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="full pipeline for one configuration")
    pr.add_argument("--config", required=True)
    pr.add_argument("--ablation", choices=ABLATIONS)
    pr.add_argument("--out", help="write the test MetricTable as CSV here")

    ps = sub.add_parser("sweep", help="grid over r, center, width, phi")
    ps.add_argument("--config", required=True)
    ps.add_argument("--grid", required=True)
    ps.add_argument("--out", required=True)

    pb = sub.add_parser("baseline", help="popularity ranking on the configured split")
    pb.add_argument("--config", required=True)
    pb.add_argument("--out")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            config = load_config(args.config, ablation=args.ablation)
            report = run(config)
            sys.stdout.write(report.to_text())
            if args.out:
                atomic_write_text(args.out, report.metrics.to_csv())
        elif args.command == "baseline":
            report = run_baseline(load_config(args.config))
            sys.stdout.write(report.to_text())
            if args.out:
                atomic_write_text(args.out, report.metrics.to_csv())
        else:
            config = load_config(args.config)
            rows = sweep(config, load_grid(args.grid))
            atomic_write_text(args.out, sweep_to_csv(rows, config.ks))
            failed = sum(1 for row in rows if row.get("error"))
            sys.stdout.write(f"{len(rows)} points written to {args.out} ({failed} failed)\n")
    except ConfigError as exc:
        print(f"gsprec: error [stage=config]: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"gsprec: error {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"gsprec: error [stage=output]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
