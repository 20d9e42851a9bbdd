#!/usr/bin/env python3
"""Plot subabsorb outputs: a sweep summary or single trace CSVs.

  tools/plot.py out/fig7_beta/summary.csv
  tools/plot.py out/fig8_trace/points/p000_s00/trace.csv -o trace.png
"""

import argparse
import csv
import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def plot_summary(rows, ax):
    families = defaultdict(list)
    for r in rows:
        families[float(r["series_value"])].append(r)
    swept_is_depth = all(math.isclose(float(r["swept_value"]), float(r["sigma_ss"]), rel_tol=1e-9) for r in rows)
    for beta, fam in sorted(families.items()):
        x = [float(r["sigma_ss"] if swept_is_depth else r["swept_value"]) for r in fam]
        y = [float(r["tau_over_2tau_a"]) for r in fam]
        e = [float(r["tau_err_over_2tau_a"]) for r in fam]
        label = f"beta/2pi = {beta:.1e}" if len(families) > 1 else None
        ax.errorbar(x, y, yerr=e, marker="o", capsize=2, label=label)
    ax.axhline(1.0, color="grey", lw=0.8, ls="--")
    ax.set_xlabel("optical depth" if swept_is_depth else "swept value (natural units)")
    ax.set_ylabel("tau / 2 tau_a")
    if len(families) > 1:
        ax.set_xscale("log")
        ax.legend(fontsize="small")


def plot_trace(rows, ax):
    t = [float(r["t_ns"]) for r in rows]
    if "P_mean" in rows[0]:
        ax.plot(t, [float(r["P_mean"]) for r in rows])
        ax.set_ylabel("normalized dipole")
    elif "P_normalized" in rows[0]:
        ax.plot(t, [float(r["P_normalized"]) for r in rows])
        ax.set_ylabel("normalized dipole")
    else:
        sigma = []
        for r in rows:
            i_in, i_out = float(r["I_input"]), float(r["I_output"])
            sigma.append(math.log(i_in / i_out) if i_in > 0 and i_out > 0 else float("nan"))
        ax.plot(t, sigma)
        ax.set_ylabel("optical depth")
    ax.set_xlabel("t (ns)")


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("csv", nargs="+")
    parser.add_argument("-o", "--output", default="plot.png")
    args = parser.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4))
    for path in args.csv:
        rows = read_rows(path)
        if not rows:
            continue
        (plot_summary if "tau_over_2tau_a" in rows[0] else plot_trace)(rows, ax)
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(args.output)


if __name__ == "__main__":
    main()
