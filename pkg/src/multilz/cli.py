"""Command line entry point: ``multilz {sweep,point,audit,oracle}``.

Values are resolved in this order, later winning: SweepConfig defaults, the
``--config`` JSON file, ``omega``/``n_fock`` from ``--custom-file``, then
explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import logging
import sys

import numpy as np

from . import __version__
from .analysis import bowtie_strong_decoherence, gap_sequence, lz_probability, triangle_incoherent
from .config import SweepConfig, load_custom_model, load_sweep_config, parse_grid
from .sweep import (
    CSV_HEADER,
    PointError,
    convergence_audit,
    point_trajectory,
    run_point,
    run_sweep,
    write_trajectory,
)


def _couplings(values):
    if not values:
        return None
    return tuple(c.strip() for v in values for c in v.split(",") if c.strip())


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with SweepConfig fields")
    p.add_argument("--model", help="equal_slope, bow_tie, triangle, two_level or custom")
    p.add_argument("--coupling", action="append",
                   help="coupling name; repeat or comma-separate for several")
    p.add_argument("--delta-grid", type=parse_grid, help="'a,b,c', 'lo:hi:n' or 'lo:hi:n:log'")
    p.add_argument("--g-grid", type=parse_grid, help="g in units of Delta, same syntax")
    p.add_argument("--omega", type=float, help="oscillator frequency in units of Delta")
    p.add_argument("--nfock", type=int, help="Fock states kept")
    p.add_argument("--max-fock", type=int, help="raise n_fock up to this while leakage is high")
    p.add_argument("--tol", type=float, help="integrator relative tolerance")
    p.add_argument("--tspan", type=float, help="sweep window |v t| <= tspan (units of Delta)")
    p.add_argument("--readout", choices=("eigen", "bare"))
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output path (stdout if omitted)")
    p.add_argument("--custom-file", help="JSON custom model (A, B, optional C, omega, n_fock)")
    p.add_argument("-v", "--verbose", action="store_true")


def build_config(args) -> SweepConfig:
    cfg = load_sweep_config(args.config) if args.config else SweepConfig()
    early = {}
    custom_file = args.custom_file or cfg.custom_file
    if custom_file:
        custom = load_custom_model(custom_file)
        early = {"model": "custom", "custom_file": custom_file,
                 "omega_over_delta": custom.omega, "n_fock": custom.n_fock}
        if custom.C is not None and not args.coupling:
            early["couplings"] = ("custom_diagonal",)
        if early["n_fock"] is not None and cfg.max_fock is not None and cfg.max_fock < early["n_fock"]:
            early["max_fock"] = early["n_fock"]
    cfg = cfg.with_overrides(**early)
    return cfg.with_overrides(
        model=args.model,
        couplings=_couplings(args.coupling),
        delta_grid=args.delta_grid,
        g_grid=args.g_grid,
        omega_over_delta=args.omega,
        n_fock=args.nfock,
        max_fock=args.max_fock,
        rel_tol=args.tol,
        t_span=args.tspan,
        readout=args.readout,
        workers=args.workers,
        output=getattr(args, "out", None),
    )


def _emit(text: str, path) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    result = run_sweep(cfg)
    if cfg.output is None:
        sys.stdout.write(result.to_csv())
    bad = result.failed
    print(f"{len(result.rows)} points, {len(bad)} not accepted", file=sys.stderr)
    return 1 if bad else 0


def cmd_point(args) -> int:
    cfg = build_config(args)
    cfg = cfg.with_overrides(output=None)
    delta = args.delta if args.delta is not None else cfg.delta_grid[0]
    g = args.g if args.g is not None else cfg.g_grid[0]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(CSV_HEADER)
    status = 0
    for coupling in cfg.couplings:
        try:
            row = run_point(cfg, delta, g, coupling)
        except PointError as exc:
            print(exc, file=sys.stderr)
            if exc.row is None:
                return 1
            row, status = exc.row, 1
        w.writerow(row.csv_fields())
    if args.trajectory:
        write_trajectory(args.trajectory, point_trajectory(cfg, delta, g, cfg.couplings[0], args.samples))
    return status


def cmd_audit(args) -> int:
    cfg = build_config(args).with_overrides(output=None)
    sample = [(c, d, g) for c in cfg.couplings for d, g in itertools.product(cfg.delta_grid, cfg.g_grid)]
    report = convergence_audit(cfg, sample, extra_fock=args.extra_fock, tol_factor=args.tol_factor)
    lines = report.lines()
    lines.append(f"max |dP| = {report.max_change:.3e} (limit {args.limit:g})")
    _emit("\n".join(lines) + "\n", getattr(args, "out", None))
    return 0 if report.max_change < args.limit else 1


def cmd_oracle(args) -> int:
    if args.curve == "gaps":
        seq = gap_sequence(args.alpha, args.nmax)
        rows = ["n,gap,weight"] + [f"{n},{a:.12g},{w:.12g}" for n, (a, w) in
                                   enumerate(zip(seq.gaps, seq.weights))]
    else:
        deltas = np.array(args.delta_grid or parse_grid("0.01:3:24:log"))
        if args.curve == "lz":
            rows = ["delta,p_remain"] + [f"{d:.12g},{lz_probability(d):.12g}" for d in deltas]
        else:
            f = bowtie_strong_decoherence if args.curve == "bow_tie" else triangle_incoherent
            rows = ["delta,p1,p2,p3"] + [
                f"{d:.12g}," + ",".join(f"{x:.12g}" for x in p) for d, p in zip(deltas, f(deltas))
            ]
    _emit("\n".join(rows) + "\n", args.out)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="multilz", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="final populations over the (delta, g) grid")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("point", help="one (delta, g) point, optionally with a trajectory")
    _common(p)
    p.add_argument("--delta", type=float)
    p.add_argument("--g", type=float)
    p.add_argument("--trajectory", help="CSV path for t,P1..Pd,n_mean rows")
    p.add_argument("--samples", type=int, default=201)
    p.set_defaults(func=cmd_point)

    p = sub.add_parser("audit", help="rerun grid points with more Fock states and tighter tolerance")
    _common(p)
    p.add_argument("--extra-fock", type=int, default=20)
    p.add_argument("--tol-factor", type=float, default=0.1)
    p.add_argument("--limit", type=float, default=1e-3)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("oracle", help="print closed-form reference curves")
    p.add_argument("curve", choices=("lz", "bow_tie", "triangle", "gaps"))
    p.add_argument("--delta-grid", type=parse_grid)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--nmax", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
