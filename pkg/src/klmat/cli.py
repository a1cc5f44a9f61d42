"""Command-line entry point: ``klmat run | plot | synth``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import ConfigError, DataError, KlmatError
from .experiment import DEFAULT_BETAS, emit_plot_script, run_sweep, sweep_summary
from .factorization import TrainConfig
from .synthetic import synthetic_ratings, write_csv_small

logger = logging.getLogger("klmat")


def _floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="klmat", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="beta sweep of vanilla MF vs KL-Mat, results to CSV")
    run.add_argument("--dataset", required=True, help="ratings.csv or ratings.dat")
    run.add_argument("--format", choices=["csv-small", "dat-1m"], default="csv-small")
    run.add_argument("--factors", type=int, default=10)
    run.add_argument("--lr", type=float, default=0.01)
    run.add_argument("--klmat-lr", type=float, default=None)
    run.add_argument("--epochs", type=int, default=30)
    run.add_argument("--klmat-epochs", type=int, default=None)
    betas = run.add_mutually_exclusive_group()
    betas.add_argument("--beta", type=float, dest="beta")
    betas.add_argument("--betas", type=_floats, default=list(DEFAULT_BETAS))
    seeds = run.add_mutually_exclusive_group()
    seeds.add_argument("--seed", type=int, dest="seed")
    seeds.add_argument("--seeds", type=_ints, default=[1, 2, 3])
    run.add_argument("--split", type=float, default=0.9)
    run.add_argument("--top-k", type=int, default=10)
    run.add_argument("--lambda", type=float, default=0.1, dest="lam")
    run.add_argument("--rank-mode", choices=["max", "min"], default="max")
    run.add_argument("--init-scale", type=float, default=0.1)
    run.add_argument("--epsilon-guard", type=float, default=1e-8)
    run.add_argument("--out", default="results.csv")
    run.add_argument("--dump-ranks", default=None,
                     help="CSV path for (item,count,rank,approx_rank); '{seed}' is substituted")
    run.add_argument("--save-models", default=None, metavar="DIR")
    run.add_argument("--raw-dot-mae", action="store_true",
                     help="also log MAE computed from raw dot products")
    run.add_argument("--summary", action="store_true", help="print a JSON summary to stdout")

    plot = sub.add_parser("plot", help="write a gnuplot script from a results CSV")
    plot.add_argument("--csv", required=True)
    plot.add_argument("--out", default="plot.gp")

    synth = sub.add_parser("synth", help="write a synthetic ratings.csv")
    synth.add_argument("--out", required=True)
    synth.add_argument("--users", type=int, default=200)
    synth.add_argument("--items", type=int, default=500)
    synth.add_argument("--per-user", type=int, default=40)
    synth.add_argument("--seed", type=int, default=0)
    return parser


def _run(args) -> int:
    if args.beta is not None:
        args.betas = [args.beta]
    if args.seed is not None:
        args.seeds = [args.seed]
    config = TrainConfig(
        k=args.factors,
        learning_rate=args.lr,
        epochs=args.epochs,
        epsilon_guard=args.epsilon_guard,
        init_scale=args.init_scale,
        klmat_epochs=args.klmat_epochs,
        klmat_learning_rate=args.klmat_lr,
    )
    try:
        open(args.dataset, "rb").close()
    except OSError as exc:
        raise DataError(str(exc)) from None
    rows = run_sweep(
        args.dataset, args.format.replace("-", "_"), config, args.betas, args.seeds, args.out,
        top_k=args.top_k, lam=args.lam, split_ratio=args.split, rank_mode=args.rank_mode,
        dump_ranks=args.dump_ranks, model_dir=args.save_models, raw_dot_mae=args.raw_dot_mae,
    )
    logger.info("wrote %d rows to %s", len(rows), args.out)
    if args.summary:
        json.dump(sweep_summary(rows), sys.stdout, indent=2)
        sys.stdout.write("\n")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "plot":
            emit_plot_script(args.csv, args.out)
            return 0
        if args.command == "synth":
            rows = synthetic_ratings(args.users, args.items, args.per_user, seed=args.seed)
            write_csv_small(rows, args.out)
            return 0
    except KlmatError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("%s", exc)
        return ConfigError.exit_code
    return 1


if __name__ == "__main__":
    sys.exit(main())
