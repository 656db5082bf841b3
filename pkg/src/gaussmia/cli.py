"""Command-line entry point: ``gaussmia run|theory|hardness|bounds``."""

from __future__ import annotations

import argparse
import sys

from gaussmia.analysis.bounds import d_star, informed_tv_bound, known_cov_bounds
from gaussmia.analysis.theory import run_theory_suite
from gaussmia.config import load_config
from gaussmia.errors import MiaLabError
from gaussmia.gaussians import RngStream
from gaussmia.hardness import run_hardness_suite
from gaussmia.runner import GAME_EXPERIMENTS, run_experiment, write_csv


def _print_checks(results, out) -> bool:
    width = max(len(r.check_id) for r in results)
    print(f"{'check':<{width}}  {'measured':>12}  {'predicted':>12}  {'tolerance':>10}  result", file=out)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        line = f"{r.check_id:<{width}}  {r.measured:>12.6g}  {r.predicted:>12.6g}  {r.tolerance:>10.3g}  {status}"
        if r.note:
            line += f"  ({r.note})"
        print(line, file=out)
    return all(r.passed for r in results)


def _cmd_run(args, out) -> int:
    cfg = load_config(args.config).with_overrides(seed=args.seed, threads=args.threads)
    if cfg.experiment == "theory":
        return 0 if _print_checks(run_theory_suite(RngStream(cfg.seed)), out) else 1
    if cfg.experiment == "hardness":
        return 0 if _print_checks(run_hardness_suite(RngStream(cfg.seed)), out) else 1
    if cfg.experiment == "bounds":
        return _print_bounds(cfg.n, cfg.d, cfg.m, cfg.rho, out)
    assert cfg.experiment in GAME_EXPERIMENTS
    rows = run_experiment(cfg)
    if args.out:
        write_csv(rows, args.out)
    for r in rows:
        print(f"{r.experiment_id} {r.attack}: tpr={r.tpr:.4f} fpr={r.fpr:.4f} adv={r.advantage:.4f} "
              f"[{r.ci_low:.4f}, {r.ci_high:.4f}] tv_bound={r.tv_bound:.4f}", file=out)
    return 0


def _print_bounds(n, d, m, rho, out) -> int:
    if n is None or rho is None:
        print("bounds need n and rho", file=sys.stderr)
        return 2
    print(f"d_star = {d_star(n, rho):.17g}", file=out)
    if d is not None:
        print(f"informed_tv_bound = {informed_tv_bound(n, d, rho):.17g}", file=out)
        if m is not None:
            rep = known_cov_bounds(n, m, d, rho)
            print(f"known_cov_tv_bound = {rep.tv_bound:.17g}", file=out)
            print(f"known_cov_kl_exact = {rep.kl_exact:.17g}", file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussmia", description="Membership-inference simulations on Gaussian mean releases.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="CSV output path")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--threads", type=int, help="override the worker count")

    theory = sub.add_parser("theory", help="run the numerical identity checks")
    theory.add_argument("--seed", type=int, default=0)

    hard = sub.add_parser("hardness", help="run the Mahalanobis-estimation hardness checks")
    hard.add_argument("--seed", type=int, default=0)
    hard.add_argument("--scale", type=float, default=1.0, help="multiply trial counts")

    bounds = sub.add_parser("bounds", help="print closed-form thresholds and bounds")
    bounds.add_argument("--n", type=int, required=True)
    bounds.add_argument("--rho", type=float, required=True)
    bounds.add_argument("--d", type=int)
    bounds.add_argument("--m", type=int)
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args, out)
        if args.command == "theory":
            return 0 if _print_checks(run_theory_suite(RngStream(args.seed)), out) else 1
        if args.command == "hardness":
            return 0 if _print_checks(run_hardness_suite(RngStream(args.seed), args.scale), out) else 1
        return _print_bounds(args.n, args.d, args.m, args.rho, out)
    except (MiaLabError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
