"""Plot cumulative cost curves from ``sai-bench run`` CSV files.

    python recipes/plot_cumulative.py fixed.csv optimize.csv incremental.csv -o fig.png

Needs matplotlib, which the package itself does not depend on. The setup row
of an optimize-and-run file (vector index 0) shows up as the offset at the
start of its curve.
"""
import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from saishift.bench import read_csv


def curves(path, lu_weight):
    res = read_csv(path)
    idx = np.array([r.vector_index for r in res.records])
    time_s = np.array([r.cumulative_time_s for r in res.records])
    # lu_count is already a running total
    cost = np.cumsum([r.arnoldi_iters for r in res.records]) + lu_weight * np.array([r.lu_count for r in res.records])
    label = res.summary.get("strategy", path)
    return label, idx, time_s, cost


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv", nargs="+")
    parser.add_argument("-o", "--output", default="cumulative.png")
    parser.add_argument("--lu-weight", type=float, default=0.0,
                        help="factorization cost in Arnoldi-iteration units for the right panel")
    args = parser.parse_args(argv)

    fig, (ax_t, ax_c) = plt.subplots(1, 2, figsize=(10, 4), constrained_layout=True)
    for path in args.csv:
        label, idx, time_s, cost = curves(path, args.lu_weight)
        ax_t.plot(idx, time_s, marker=".", label=label)
        ax_c.plot(idx, cost, marker=".", label=label)
    ax_t.set(xlabel="vectors processed", ylabel="cumulative time [s]")
    ax_c.set(xlabel="vectors processed", ylabel="cumulative Arnoldi iterations")
    if args.lu_weight:
        ax_c.set_ylabel(f"cumulative iterations + {args.lu_weight:g} x factorizations")
    for ax in (ax_t, ax_c):
        ax.grid(alpha=0.3)
        ax.legend()
    fig.savefig(args.output, dpi=150)
    print(args.output)


if __name__ == "__main__":
    main()
