"""Command line interface: ``rechepim {gen,run,stats,aggregate,oracle}``."""

from __future__ import annotations

import argparse
import logging
import sys

from .archipelago import ConfigError
from .perm import ContractError


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=default, help="root random seed")
    p.add_argument("--config", default=default, help="plan file (INI)")
    p.add_argument("--deterministic", action="store_true",
                   default=argparse.SUPPRESS if suppress else False,
                   help="round-robin island scheduling, bit-reproducible output")
    p.add_argument("--threads", type=int, default=default, help="parallel experiment cells")
    p.add_argument("-v", "--verbose", action="store_true",
                   default=argparse.SUPPRESS if suppress else False)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rechepim",
        description="Reconfigurable heterogeneous island models for unsigned reversal distance.",
        parents=[_global_flags(False)],
    )
    common = _global_flags(True)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="write a random permutation dataset")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--out", required=True)

    r = sub.add_parser("run", parents=[common], help="run the experiment described by --config")
    r.add_argument("--output", help="override the plan's results CSV")
    r.add_argument("--timeline", help="override the plan's timeline CSV")

    s = sub.add_parser("stats", parents=[common], help="Friedman test and Holm post-hoc")
    s.add_argument("--results", required=True)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--out", help="Holm table CSV (default: stdout)")
    s.add_argument("--models", help="comma separated subset of models")

    a = sub.add_parser("aggregate", parents=[common], help="mean, radar and distribution tables")
    a.add_argument("--results", required=True)
    a.add_argument("--timeline")
    a.add_argument("--out-dir", required=True)

    o = sub.add_parser("oracle", parents=[common], help="exact distances of a small permutation")
    o.add_argument("perm", nargs="+", help="permutation entries, e.g. 3 1 2 or -2 1")
    return parser


def _cmd_gen(args):
    from .experiment import gen_dataset

    gen_dataset(args.n, args.count, args.seed if args.seed is not None else 0, args.out)
    print(f"wrote {args.count} permutations of size {args.n} to {args.out}")


def _cmd_run(args):
    from .config import load_plan
    from .experiment import run_experiment

    if not args.config:
        raise ConfigError("run needs --config")
    plan = load_plan(
        args.config,
        seed=args.seed,
        threads=args.threads,
        output=args.output,
        timeline=args.timeline,
        deterministic=True if args.deterministic else None,
    )
    out = run_experiment(plan)
    print(f"results in {out}")


def _cmd_stats(args):
    import csv

    from .experiment import holm_csv_rows, statistics_tables, write_holm_csv

    models = [m.strip() for m in args.models.split(",")] if args.models else None
    tables = statistics_tables(args.results, args.alpha, models)
    for n, fr, _ in tables:
        ranks = ", ".join(f"{m}={r:.3f}" for m, r in fr.mean_ranks.items())
        print(f"# n={n} blocks={fr.n_blocks} friedman chi2={fr.statistic:.6g} "
              f"p={fr.p_value:.6g} control={fr.control} ranks: {ranks}", file=sys.stderr)
    if args.out:
        write_holm_csv(tables, args.out)
    else:
        csv.writer(sys.stdout, lineterminator="\n").writerows(holm_csv_rows(tables))


def _cmd_aggregate(args):
    from .experiment import aggregate

    for name, path in aggregate(args.results, args.out_dir, args.timeline).items():
        print(f"{name}: {path}")


def _cmd_oracle(args):
    from .distance import (
        MAX_URD_ORACLE_N,
        brute_force_srd,
        brute_force_urd,
        signed_reversal_distance,
    )
    from .perm import is_unsigned_permutation

    perm = tuple(int(x) for x in args.perm)
    if is_unsigned_permutation(perm) and len(perm) <= MAX_URD_ORACLE_N:
        print(f"urd {brute_force_urd(perm)}")
    print(f"srd {brute_force_srd(perm)}")
    print(f"hannenhalli_pevzner {signed_reversal_distance(perm)}")


COMMANDS = {
    "gen": _cmd_gen,
    "run": _cmd_run,
    "stats": _cmd_stats,
    "aggregate": _cmd_aggregate,
    "oracle": _cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args)
    except (ConfigError, ContractError, ValueError, OSError) as exc:
        print(f"rechepim {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
