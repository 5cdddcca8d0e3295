"""Command line entry point: ``stepdown-slope run`` and ``stepdown-slope lambda``."""

import argparse
import json
import logging
import os
import sys

from .exceptions import ConfigError, SlopeError
from .harness import emit_heatmap, emit_report, load_config, run_experiment
from .sequences import SequenceSpec

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


def _parser():
    p = argparse.ArgumentParser(prog="stepdown-slope",
                                description="SLOPE-family Monte Carlo experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment grid from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int)
    run.add_argument("--reps", type=int, help="override replications")
    run.add_argument("--jobs", type=int,
                     help="worker processes (default: $STEPDOWN_SLOPE_JOBS or 1)")

    lam = sub.add_parser("lambda", help="write a penalty sequence to CSV")
    lam.add_argument("kind", choices=["bh", "kfwer", "fdp"])
    lam.add_argument("--m", type=int, required=True)
    lam.add_argument("--alpha", type=float, default=0.1)
    lam.add_argument("--q", type=float, default=0.1)
    lam.add_argument("--gamma", type=float, default=0.1)
    lam.add_argument("--k", type=int, default=1)
    lam.add_argument("--out", required=True, help="CSV path")
    return p


def _cmd_run(args):
    cfg = load_config(args.config, {"seed": args.seed, "replications": args.reps})
    reports = run_experiment(cfg, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    emit_report(reports, os.path.join(args.out, "report.csv"))
    emit_heatmap(reports, os.path.join(args.out, "heatmap.csv"))
    with open(os.path.join(args.out, "config.json"), "w") as fh:
        json.dump(cfg.echo(), fh, indent=2, sort_keys=True)
    print(f"wrote {len(reports)} rows to {os.path.join(args.out, 'report.csv')}")


def _cmd_lambda(args):
    spec = SequenceSpec(m=args.m, alpha=args.alpha, q=args.q, gamma=args.gamma, k=args.k)
    seq = {"bh": spec.bh, "kfwer": spec.kfwer, "fdp": spec.fdp}[args.kind]()
    seq.to_csv(args.out)


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        {"run": _cmd_run, "lambda": _cmd_lambda}[args.command](args)
    except ConfigError as exc:
        print(json.dumps({"error": "invalid config", "reasons": exc.reasons}, indent=2),
              file=sys.stderr)
        return EXIT_INVALID
    except (SlopeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
