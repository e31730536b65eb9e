"""``sai-bench`` command line.

    sai-bench run --config run.cfg [--override key=value]...
    sai-bench crossover fixed.csv adaptive.csv [--lu-weight W]

Exit status is 0 on success, 1 for configuration or I/O errors and 2 when a
solver fails or any vector does not converge.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .bench import (
    ConfigError,
    RunConfig,
    build_matrix,
    crossover_report,
    emit_csv,
    export_matrix,
    read_csv,
    run_benchmark,
)
from .sparse import FactorizationError

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2

CONFIG_HELP = """\
config keys (flat 'key = value', '#' comments):
  problem            conv_diff | aniso
  n, peclet          grid size, Peclet number (conv_diff)
  lam, theta         anisotropy ratio and angle (aniso)
  t, tol, max_iters  time, residual tolerance, Krylov dimension cap
  strategy           fixed | optimize_and_run | incremental
  fixed_delta        delta for the fixed strategy (default 0.1 / 0.07)
  lo, hi             delta search interval (default 0.01 and 0.1 / 0.07)
  K, N               Arnoldi steps and trial vectors of the shift search;
                     K should lie past the stagnation phase of convergence,
                     e.g. 25 for conv_diff at t=1e-4 and 20 for aniso at t=0.1
  num_vectors, seed  number of starting vectors and RNG seed
  initial_states     gaussian | normal
  covariance_scale   variance of the gaussian bumps (default 0.05)
  brent_tol, max_brent_iters
                     shift search tolerance and iteration cap
  stop_width, delta_gamma
                     bisection stop width and derivative step (incremental)
  reorthogonalize    second Gram-Schmidt pass (true | false)
  aniso_divide_by_h2 scale the anisotropic stencil by 1/h^2
  output             CSV path (stdout if unset)
  export_matrix      write A in Matrix Market format to this path
"""


def _run(args):
    try:
        cfg = RunConfig.from_file(args.config, args.override)
    except (ConfigError, TypeError) as exc:
        print(f"sai-bench: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    A = build_matrix(cfg)
    if cfg.export_matrix:
        try:
            export_matrix(cfg, A, cfg.export_matrix)
        except OSError as exc:
            print(f"sai-bench: cannot export matrix: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    baseline = None
    if args.baseline:
        try:
            baseline = read_csv(args.baseline)
        except (OSError, ConfigError) as exc:
            print(f"sai-bench: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    try:
        result = run_benchmark(cfg, A=A, baseline=baseline)
    except FactorizationError as exc:
        print(f"sai-bench: factorization failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = cfg.output or sys.stdout
    try:
        emit_csv(result, out)
    except OSError as exc:
        print(f"sai-bench: cannot write {out}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    s = result.summary
    print(
        f"{cfg.strategy}: mean Arnoldi iterations {s['mean_arnoldi_iters']:.2f}, "
        f"{s['total_lu']} factorizations, {s['total_time_s']:.2f} s",
        file=sys.stderr,
    )
    if s["unconverged"]:
        print(f"sai-bench: vectors not converged: {s['unconverged']}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _crossover(args):
    try:
        res, table = crossover_report(args.fixed, args.adaptive, args.lu_weight)
    except (OSError, ConfigError) as exc:
        print(f"sai-bench: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(table)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="sai-bench", description="SAI Krylov shift benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser(
        "run", help="run one strategy", epilog=CONFIG_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    run.add_argument("--config", required=True)
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--baseline", help="fixed-shift CSV; adds crossover entries to the summary")
    run.set_defaults(func=_run)

    cross = sub.add_parser("crossover", help="compare a fixed-shift and an adaptive CSV")
    cross.add_argument("fixed")
    cross.add_argument("adaptive")
    cross.add_argument("--lu-weight", type=float, default=0.0,
                       help="cost of one factorization in Arnoldi-iteration units")
    cross.set_defaults(func=_crossover)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
