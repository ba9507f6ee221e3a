"""Plot the CSVs written by make_data.py (needs matplotlib, the ``plot`` extra)."""

import argparse
import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def plot_heatmap(path: Path):
    rows = [r for r in read_rows(path) if r["status"].startswith("ok")]
    couplings = sorted({r["coupling"] for r in rows})
    fig, axes = plt.subplots(len(couplings), 3, figsize=(10, 2.6 * len(couplings)), squeeze=False)
    for i, c in enumerate(couplings):
        sub = [r for r in rows if r["coupling"] == c]
        d = sorted({float(r["delta"]) for r in sub})
        g = sorted({float(r["g_over_delta"]) for r in sub})
        for k in range(3):
            z = np.full((len(g), len(d)), np.nan)
            for r in sub:
                z[g.index(float(r["g_over_delta"])), d.index(float(r["delta"]))] = float(r[f"p{k + 1}"])
            ax = axes[i, k]
            im = ax.pcolormesh(d, g, z, vmin=0, vmax=1, shading="nearest")
            ax.set_xscale("log")
            ax.set_title(f"{c}  P{k + 1}", fontsize=9)
            ax.set_xlabel("delta")
            ax.set_ylabel("g / Delta")
    fig.colorbar(im, ax=axes, shrink=0.6)
    out = path.with_suffix(".png")
    fig.savefig(out, dpi=120)
    print(out)


def plot_strong(path: Path):
    rows = [r for r in read_rows(path) if r["status"].startswith("ok")]
    ref = np.loadtxt(path.with_name(path.stem + "_formula.csv"), delimiter=",", skiprows=1)
    fig, ax = plt.subplots(figsize=(6, 4))
    for k, colour in enumerate(("tab:red", "tab:green", "tab:blue")):
        ax.plot(ref[:, 0], ref[:, k + 1], color=colour, lw=1)
        for c, marker in zip(sorted({r["coupling"] for r in rows}), "os^vD"):
            pts = [(float(r["delta"]), float(r[f"p{k + 1}"])) for r in rows
                   if r["coupling"] == c and float(r["g_over_delta"]) > 0]
            if pts:
                ax.plot(*zip(*pts), marker, color=colour, ms=4, mfc="none", label=f"{c} P{k + 1}")
    ax.set_xscale("log")
    ax.set_xlabel("delta")
    ax.set_ylabel("final probability")
    ax.legend(fontsize=6, ncol=3)
    out = path.with_suffix(".png")
    fig.savefig(out, dpi=120)
    print(out)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("csv", type=Path, nargs="+")
    for path in p.parse_args().csv:
        if path.name.startswith("heatmap_"):
            plot_heatmap(path)
        elif path.name.endswith("_strong.csv"):
            plot_strong(path)


if __name__ == "__main__":
    main()
