"""Generate the CSV data sets behind the standard plots.

    python scripts/make_data.py heatmaps --model bow_tie --out data/
    python scripts/make_data.py bow_tie_strong --out data/
    python scripts/make_data.py triangle_strong --out data/
    python scripts/make_data.py closed --out data/

Heatmaps are expensive (24 x 17 grid per coupling); use --coarse for a quick look.
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from multilz.analysis import bowtie_strong_decoherence, lz_probability, triangle_incoherent
from multilz.config import SweepConfig, lin_grid, log_grid
from multilz.sweep import run_sweep

HEATMAP_COUPLINGS = {
    "equal_slope": ("c_1_3", "c_1_1", "c_3_1"),
    "bow_tie": ("c_0_1", "c_1_3", "c_3_1", "c_1_0", "c_1_1"),
    "triangle": ("c_0_1", "c_1_3", "c_3_1", "c_1_0"),
}


def heatmaps(args):
    deltas = log_grid(0.01, 3.0, 8 if args.coarse else 24)
    gs = lin_grid(0.0, 4.0, 5 if args.coarse else 17)
    cfg = SweepConfig(model=args.model, couplings=HEATMAP_COUPLINGS[args.model], delta_grid=deltas,
                      g_grid=gs, max_fock=args.max_fock, workers=args.workers,
                      output=str(args.out / f"heatmap_{args.model}.csv"))
    res = run_sweep(cfg)
    print(f"{cfg.output}: {len(res.rows)} rows, {len(res.failed)} not accepted")


def _strong(args, model, couplings, formula, name):
    deltas = log_grid(0.01, 3.0, 12 if args.coarse else 24)
    out = args.out / f"{name}.csv"
    cfg = SweepConfig(model=model, couplings=couplings, delta_grid=deltas, g_grid=(0.0, 4.0),
                      max_fock=args.max_fock, workers=args.workers, output=str(out))
    res = run_sweep(cfg)
    ref = formula(np.array(deltas))
    np.savetxt(args.out / f"{name}_formula.csv", np.column_stack([deltas, ref]), delimiter=",",
               header="delta,p1,p2,p3", comments="", fmt="%.10g")
    print(f"{out}: {len(res.rows)} rows, {len(res.failed)} not accepted")


def bow_tie_strong(args):
    _strong(args, "bow_tie", ("c_0_1",), bowtie_strong_decoherence, "bow_tie_strong")


def triangle_strong(args):
    _strong(args, "triangle", HEATMAP_COUPLINGS["triangle"], triangle_incoherent, "triangle_strong")


def closed(args):
    deltas = log_grid(0.01, 3.0, 40)
    cfg = SweepConfig(model="equal_slope", delta_grid=deltas, g_grid=(0.0,), n_fock=4)
    rows = {"equal_slope": run_sweep(cfg).rows}
    rows["bow_tie"] = run_sweep(cfg.with_overrides(model="bow_tie")).rows
    rows["triangle"] = run_sweep(cfg.with_overrides(model="triangle")).rows
    table = [deltas, lz_probability(np.array(deltas))]
    header = ["delta", "lz"]
    for model, rs in rows.items():
        table += [np.array([r.populations[k] for r in rs]) for k in range(3)]
        header += [f"{model}_p{k + 1}" for k in range(3)]
    np.savetxt(args.out / "closed.csv", np.column_stack(table), delimiter=",",
               header=",".join(header), comments="", fmt="%.10g")
    print(args.out / "closed.csv")


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("dataset", choices=("heatmaps", "bow_tie_strong", "triangle_strong", "closed"))
    p.add_argument("--model", default="equal_slope", choices=tuple(HEATMAP_COUPLINGS))
    p.add_argument("--out", type=Path, default=Path("data"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--max-fock", type=int, default=150)
    p.add_argument("--coarse", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.WARNING)
    args.out.mkdir(parents=True, exist_ok=True)
    globals()[args.dataset](args)


if __name__ == "__main__":
    main()
