"""Grid runner: final populations over (delta, g) for one model and several couplings."""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analysis import (
    eigenbasis_populations,
    oscillator_populations,
    system_populations,
    top_fock_leakage,
)
from .config import CustomModel, SweepConfig, load_custom_model
from .model import (
    COUPLING_DIAGONALS,
    CompositeHamiltonian,
    ModelError,
    OscillatorSpec,
    build_coupling,
    build_custom_model,
    build_model,
    ground_state,
)
from .propagator import EvolutionConfig, evolve

log = logging.getLogger(__name__)

CSV_HEADER = (
    "model", "coupling", "delta", "g_over_delta", "p1", "p2", "p3",
    "norm_drift", "leakage", "steps", "wall_ms", "status",
)


class PointError(RuntimeError):
    """A grid point failed; carries its coordinates and, if one exists, the row."""

    def __init__(self, message: str, coupling: str, delta: float, g: float, row: "Row | None" = None):
        super().__init__(f"[{coupling} delta={delta:g} g={g:g}] {message}")
        self.coupling = coupling
        self.delta = delta
        self.g = g
        self.row = row


@dataclass(frozen=True)
class Row:
    model: str
    coupling: str
    delta: float
    g_over_delta: float
    populations: tuple[float, ...]
    norm_drift: float
    leakage: float
    steps: int
    wall_ms: int
    status: str = "ok"

    @property
    def accepted(self) -> bool:
        return self.status.startswith("ok")

    @property
    def p(self) -> np.ndarray:
        return np.array(self.populations)

    def csv_fields(self) -> list[str]:
        p = list(self.populations) + [0.0] * (3 - len(self.populations))
        return [
            self.model, self.coupling, repr(self.delta), repr(self.g_over_delta),
            *(repr(float(x)) for x in p),
            repr(self.norm_drift), repr(self.leakage), str(self.steps), str(self.wall_ms), self.status,
        ]


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[Row]

    @property
    def failed(self) -> list[Row]:
        return [r for r in self.rows if not r.accepted]

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_fields())
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def grid(self, coupling: str, state: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(deltas, gs, P[state]) with P shaped (len(deltas), len(gs)); state is 1-based."""
        deltas = np.array(self.config.delta_grid)
        gs = np.array(self.config.g_grid)
        out = np.full((deltas.size, gs.size), np.nan)
        for r in self.rows:
            if r.coupling == coupling and r.accepted:
                i = int(np.flatnonzero(deltas == r.delta)[0])
                j = int(np.flatnonzero(gs == r.g_over_delta)[0])
                out[i, j] = r.populations[state - 1]
        return deltas, gs, out


def _custom(config: SweepConfig) -> CustomModel | None:
    return load_custom_model(config.custom_file) if config.model == "custom" else None


def point_hamiltonian(config: SweepConfig, delta: float, g: float, coupling: str,
                      custom: CustomModel | None = None) -> CompositeHamiltonian:
    """Composite Hamiltonian at adiabaticity delta (Delta = 1, v = 1 / (4 delta))."""
    v = 1.0 / (4.0 * delta)
    if config.model == "custom":
        custom = custom or _custom(config)
        model = build_custom_model(custom.A, np.asarray(custom.B) * v)
    else:
        model = build_model(config.model, 1.0, v)
    d = model.dim
    if coupling == "custom_diagonal":
        if custom is None or custom.C is None:
            raise ModelError("custom_diagonal coupling needs a custom file with a C diagonal")
        cpl = build_coupling("custom_diagonal", g, d, custom.C)
    elif d == 3:
        cpl = build_coupling(coupling, g, 3)
    else:
        # two-level: keep the first d coefficients of the named operator
        cpl = build_coupling("custom_diagonal", g, d, COUPLING_DIAGONALS[coupling][:d])
    osc = OscillatorSpec(config.omega_over_delta, config.n_fock)
    return CompositeHamiltonian(model, cpl, osc)


def _evolve_point(config: SweepConfig, delta: float, g: float, coupling: str,
                  custom: CustomModel | None):
    h = point_hamiltonian(config, delta, g, coupling, custom)
    if h.d > 3:
        raise ModelError("sweeps support at most three system levels")
    t_end = config.t_span * 4.0 * delta
    psi0 = ground_state(h, -t_end)
    res = evolve(h, psi0, EvolutionConfig(-t_end, t_end, rel_tol=config.rel_tol))
    return h, t_end, res


def run_point(config: SweepConfig, delta: float, g: float, coupling: str | None = None,
              custom: CustomModel | None = None) -> Row:
    """Ground state at v t = -t_span, evolve to +t_span, read out the system populations.

    With ``config.max_fock`` set, a point whose top-Fock leakage exceeds the
    threshold is repeated with more Fock states; the status then records the
    truncation used (``ok-nfock=70``).
    """
    coupling = coupling or config.couplings[0]
    start = time.perf_counter()
    cfg = config
    while True:
        try:
            h, t_end, res = _evolve_point(cfg, delta, g, coupling, custom)
        except (ModelError, RuntimeError, ValueError) as exc:
            raise PointError(str(exc), coupling, delta, g) from exc
        leakage = top_fock_leakage(res.final_state, h.d)
        if (leakage <= cfg.leakage_threshold or cfg.max_fock is None
                or cfg.n_fock + cfg.fock_step > cfg.max_fock):
            break
        log.info("[%s delta=%g g=%g] leakage %.1e at n_fock=%d, retrying",
                 coupling, delta, g, leakage, cfg.n_fock)
        cfg = replace(cfg, n_fock=cfg.n_fock + cfg.fock_step)
    psi = res.final_state
    if config.readout == "eigen":
        pops = eigenbasis_populations(h.at(t_end), psi, h.d).populations
    else:
        pops = system_populations(psi, h.d)
    wall_ms = int(round(1000 * (time.perf_counter() - start))) if config.record_timing else 0
    status = "ok" if cfg.n_fock == config.n_fock else f"ok-nfock={cfg.n_fock}"
    row = Row(
        config.model, coupling, float(delta), float(g), tuple(float(p) for p in pops),
        float(res.norm_drift), leakage, res.steps_taken, wall_ms, status,
    )
    if leakage > config.leakage_threshold:
        raise PointError(
            f"top-Fock leakage {leakage:.2e} above {config.leakage_threshold:.0e} "
            f"at n_fock={cfg.n_fock}",
            coupling, delta, g, replace(row, status="leakage"),
        )
    return row


def point_trajectory(config: SweepConfig, delta: float, g: float, coupling: str | None = None,
                     n_samples: int = 201, custom: CustomModel | None = None) -> np.ndarray:
    """Bare populations along the sweep: columns t, P_1..P_d, <n>."""
    coupling = coupling or config.couplings[0]
    h = point_hamiltonian(config, delta, g, coupling, custom)
    t_end = config.t_span * 4.0 * delta
    times = tuple(np.linspace(-t_end, t_end, n_samples))
    res = evolve(h, ground_state(h, -t_end),
                 EvolutionConfig(-t_end, t_end, rel_tol=config.rel_tol, sample_times=times))
    n = np.arange(h.n_fock)
    out = np.empty((len(res.trajectory), h.d + 2))
    for k, (t, psi) in enumerate(res.trajectory):
        out[k, 0] = t
        out[k, 1:-1] = system_populations(psi, h.d)
        out[k, -1] = oscillator_populations(psi, h.d) @ n
    return out


def write_trajectory(path, traj: np.ndarray) -> None:
    d = traj.shape[1] - 2
    header = ",".join(["t", *(f"P{i + 1}" for i in range(d)), "n_mean"])
    np.savetxt(path, traj, delimiter=",", header=header, comments="", fmt="%.12g")


def _task(args) -> Row:
    config, coupling, delta, g, custom = args
    try:
        return run_point(config, delta, g, coupling, custom)
    except PointError as exc:
        log.warning("%s", exc)
        if exc.row is not None:
            return exc.row
        nan = float("nan")
        d = 2 if config.model == "two_level" else 3
        msg = str(exc.__cause__ or exc).replace(",", ";").replace("\n", " ")
        return Row(config.model, coupling, float(delta), float(g), (nan,) * d, nan, nan, 0, 0,
                   f"error: {msg}")


def run_sweep(config: SweepConfig) -> SweepResult:
    """Evaluate every (coupling, delta, g); rows come out coupling-, then delta-, then g-major."""
    if config.output is not None:
        out = Path(config.output)
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.touch()
        except OSError as exc:
            raise OSError(f"cannot write sweep output {out}: {exc}") from exc
    custom = _custom(config)
    tasks = [
        (config, c, d, g, custom)
        for c in config.couplings
        for d in config.delta_grid
        for g in config.g_grid
    ]
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_task, tasks))
    else:
        rows = [_task(t) for t in tasks]
    result = SweepResult(config, rows)
    if config.output is not None:
        result.to_csv(config.output)
    return result


@dataclass(frozen=True)
class AuditEntry:
    coupling: str
    delta: float
    g: float
    base: np.ndarray
    refined: np.ndarray
    base_leakage: float = 0.0

    @property
    def change(self) -> float:
        return float(np.max(np.abs(self.refined - self.base)))


@dataclass
class AuditReport:
    entries: list[AuditEntry]

    @property
    def max_change(self) -> float:
        return max((e.change for e in self.entries), default=0.0)

    def lines(self) -> list[str]:
        return [
            f"{e.coupling} delta={e.delta:g} g={e.g:g} max|dP|={e.change:.3e} leakage={e.base_leakage:.1e}"
            for e in self.entries
        ]


def _row_even_if_leaky(config, delta, g, coupling, custom) -> Row:
    try:
        return run_point(config, delta, g, coupling, custom)
    except PointError as exc:
        if exc.row is None:
            raise
        return exc.row


def convergence_audit(config: SweepConfig, sample, extra_fock: int = 20,
                      tol_factor: float = 0.1) -> AuditReport:
    """Re-run sample points with n_fock + extra_fock and rel_tol * tol_factor.

    ``sample`` holds (delta, g) pairs, which use the first configured coupling,
    or (coupling, delta, g) triples. Points over the leakage threshold are
    still compared; the audit is how such points get quantified.
    """
    refined_cfg = replace(
        config, n_fock=config.n_fock + extra_fock, rel_tol=config.rel_tol * tol_factor
    )
    custom = _custom(config)
    entries = []
    for item in sample:
        coupling, delta, g = item if len(item) == 3 else (config.couplings[0], *item)
        base = _row_even_if_leaky(config, delta, g, coupling, custom)
        refined = _row_even_if_leaky(refined_cfg, delta, g, coupling, custom)
        entries.append(AuditEntry(coupling, float(delta), float(g), base.p, refined.p, base.leakage))
    return AuditReport(entries)
