"""Time-dependent Schroedinger integration for the system + oscillator model.

``evolve`` is an adaptive Dormand-Prince 8(5,3) integrator compiled with
numba. It never forms H(t): the generator is applied blockwise, using that
H(t) = H0 + t * diag(B (x) I) with H0 made of a dense d x d block on the system
index and a tridiagonal ladder on the oscillator index.

``evolve_piecewise_oracle`` is the independent check: freeze H at the midpoint
of each uniform slice and apply the exact exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.integrate import DOP853
from scipy.linalg import expm

from .model import CompositeHamiltonian, default_span, validate_state

_A = np.ascontiguousarray(DOP853.A, dtype=float)
_B = np.ascontiguousarray(DOP853.B, dtype=float)
_C = np.ascontiguousarray(DOP853.C, dtype=float)
_E3 = np.ascontiguousarray(DOP853.E3, dtype=float)
_E5 = np.ascontiguousarray(DOP853.E5, dtype=float)
_N_STAGES = DOP853.n_stages

NORM_TOLERANCE = 1e-6
# Per-step error target relative to the requested global tolerance; runs take
# 1e4 to 1e6 steps and the scheme loses a little norm on each.
LOCAL_TOL_FACTOR = 1e-3

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvolutionConfig:
    """Integration window and tolerances. ``None`` times mean v t = -/+ 100 Delta."""

    t_start: float | None = None
    t_end: float | None = None
    rel_tol: float = 1e-8
    max_step: float = math.inf
    sample_times: tuple[float, ...] | None = None
    max_steps: int = 200_000_000

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-3:
            raise ValueError(f"rel_tol must lie in (0, 1e-3], got {self.rel_tol}")
        if self.t_start is not None and self.t_end is not None and not self.t_start < self.t_end:
            raise ValueError("t_start must be before t_end")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")

    def span(self, h: CompositeHamiltonian) -> tuple[float, float]:
        t0, t1 = default_span(h.model)
        t0 = t0 if self.t_start is None else self.t_start
        t1 = t1 if self.t_end is None else self.t_end
        if not t0 < t1:
            raise ValueError(f"empty integration window [{t0}, {t1}]")
        return t0, t1


@dataclass
class EvolutionResult:
    final_state: np.ndarray
    norm_drift: float
    steps_taken: int
    steps_rejected: int = 0
    max_norm_drift: float = 0.0
    trajectory: list[tuple[float, np.ndarray]] | None = field(default=None, repr=False)


@numba.njit(cache=True, fastmath=True)
def _apply_generator(A, slopes, cdiag, omega, sq, nf, t, e, psi, out):
    """out = -i (H(t) - e) psi for a flat psi indexed i * nf + n."""
    d = A.shape[0]
    for i in range(d):
        ci = cdiag[i]
        diag_i = slopes[i] * t - e
        base = i * nf
        for n in range(nf):
            acc = 0j
            for j in range(d):
                acc += A[i, j] * psi[j * nf + n]
            acc += (diag_i + omega * n) * psi[base + n]
            if ci != 0.0:
                if n > 0:
                    acc += ci * sq[n - 1] * psi[base + n - 1]
                if n < nf - 1:
                    acc += ci * sq[n] * psi[base + n + 1]
            out[base + n] = complex(acc.imag, -acc.real)


@numba.njit(cache=True)
def _sq_norm(y):
    s = 0.0
    for v in y:
        s += v.real * v.real + v.imag * v.imag
    return s


@numba.njit(cache=True, fastmath=True)
def _dop853(A, slopes, cdiag, omega, y0, t0, t1, e0, e1, rtol, atol, h0, h_max,
            stops, max_steps, RK_A, RK_B, RK_C, E3, E5):
    n_total = y0.shape[0]
    nf = n_total // A.shape[0]
    sq = np.sqrt(np.arange(1, nf + 1).astype(np.float64))
    ns = RK_B.shape[0]
    K = np.empty((ns + 1, n_total), dtype=np.complex128)
    ys = np.empty(n_total, dtype=np.complex128)
    y = y0.copy()
    y_new = np.empty_like(y)
    a5 = np.empty_like(y)
    a3 = np.empty_like(y)
    out = np.empty((stops.shape[0], n_total), dtype=np.complex128)

    t = t0
    h = h0
    n_acc = 0
    n_rej = 0
    max_drift = 0.0
    status = 0
    _apply_generator(A, slopes, cdiag, omega, sq, nf, t, e0 + e1 * t, y, K[0])

    k_stop = 0
    while k_stop < stops.shape[0] and stops[k_stop] <= t:
        out[k_stop] = y
        k_stop += 1

    while t < t1:
        if n_acc + n_rej >= max_steps:
            status = 2
            break
        target = t1 if k_stop >= stops.shape[0] else min(stops[k_stop], t1)
        h_try = min(h, h_max)
        if h_try < 1e-14 * max(1.0, abs(t)):
            status = 1
            break
        h = h_try
        landing = False
        if t + h >= target:
            h = target - t
            landing = True

        for s in range(1, ns):
            ys[:] = y
            for j in range(s):
                coef = h * RK_A[s, j]
                if coef != 0.0:
                    for idx in range(n_total):
                        ys[idx] += coef * K[j, idx]
            ts = t + RK_C[s] * h
            _apply_generator(A, slopes, cdiag, omega, sq, nf, ts, e0 + e1 * ts, ys, K[s])
        y_new[:] = y
        for j in range(ns):
            coef = h * RK_B[j]
            if coef != 0.0:
                for idx in range(n_total):
                    y_new[idx] += coef * K[j, idx]
        t_new = target if landing else t + h
        _apply_generator(A, slopes, cdiag, omega, sq, nf, t_new, e0 + e1 * t_new, y_new, K[ns])

        a5[:] = 0.0
        a3[:] = 0.0
        for j in range(ns + 1):
            c5 = E5[j]
            c3 = E3[j]
            for idx in range(n_total):
                a5[idx] += c5 * K[j, idx]
                a3[idx] += c3 * K[j, idx]
        err5 = 0.0
        err3 = 0.0
        for idx in range(n_total):
            sc = atol + rtol * max(abs(y[idx]), abs(y_new[idx]))
            r5 = abs(a5[idx]) / sc
            r3 = abs(a3[idx]) / sc
            err5 += r5 * r5
            err3 += r3 * r3
        if err5 == 0.0 and err3 == 0.0:
            err = 0.0
        else:
            err = h * err5 / math.sqrt((err5 + 0.01 * err3) * n_total)

        if err < 1.0:
            t = t_new
            y[:] = y_new
            K[0] = K[ns]
            n_acc += 1
            drift = abs(math.sqrt(_sq_norm(y)) - 1.0)
            if drift > max_drift:
                max_drift = drift
            while k_stop < stops.shape[0] and stops[k_stop] <= t:
                out[k_stop] = y
                k_stop += 1
            fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** (-1.0 / 8.0))
            if landing and fac >= 1.0:
                h = max(h * fac, h_try)
            else:
                h = h * fac
        else:
            n_rej += 1
            h = h * max(0.2, 0.9 * err ** (-1.0 / 8.0))
    return y, t, n_acc, n_rej, max_drift, status, out


def _phase_correction(e0: float, e1: float, ta: float, tb: float) -> complex:
    return np.exp(-1j * (e0 * (tb - ta) + 0.5 * e1 * (tb * tb - ta * ta)))


def evolve(h: CompositeHamiltonian, psi0, config: EvolutionConfig | None = None) -> EvolutionResult:
    """Propagate psi0 over the configured window.

    A scalar energy offset <psi0|H(t)|psi0> is removed during integration and
    restored analytically, so the returned state carries the true phase.
    The norm is never renormalized.
    """
    config = config or EvolutionConfig()
    psi0 = validate_state(psi0, h.dimension)
    t0, t1 = config.span(h)
    A = np.ascontiguousarray(h.A_tilde, dtype=np.complex128)
    slopes = np.ascontiguousarray(h.model.slopes, dtype=float)
    cdiag = np.ascontiguousarray(h.coupling.elements, dtype=float)
    omega = float(h.oscillator.omega)

    prob = np.abs(psi0) ** 2
    e1 = float(prob @ h.sweep_diagonal)
    H0 = h.static_part()
    e0 = float(np.real(np.vdot(psi0, H0 @ psi0)))

    scale = np.max(np.abs(h.at(t0)).sum(axis=1)) + np.max(np.abs(h.at(t1)).sum(axis=1))
    h_init = min(0.01 / max(scale, 1.0), config.max_step, t1 - t0)

    local_tol = float(config.rel_tol) * LOCAL_TOL_FACTOR
    stops = np.array(sorted(s for s in (config.sample_times or ()) if t0 <= s <= t1), dtype=float)
    y, t_reached, n_acc, n_rej, max_drift, status, samples = _dop853(
        A, slopes, cdiag, omega, psi0.copy(), float(t0), float(t1), e0, e1,
        local_tol, local_tol, float(h_init), float(config.max_step),
        stops, int(config.max_steps), _A, _B, _C, _E3, _E5,
    )
    if status == STATUS_UNDERFLOW:
        raise IntegrationError(f"step size underflow at t={t_reached:.6g}")
    if status == STATUS_MAX_STEPS:
        raise IntegrationError(f"step budget {config.max_steps} exhausted at t={t_reached:.6g}")

    final = y * _phase_correction(e0, e1, t0, t1)
    drift = abs(np.linalg.norm(final) - 1.0)
    if max(drift, max_drift) > 10 * NORM_TOLERANCE:
        raise IntegrationError(
            f"norm drift {max(drift, max_drift):.3e} exceeds {10 * NORM_TOLERANCE:.0e}; "
            f"tighten rel_tol (now {config.rel_tol:g})"
        )
    trajectory = None
    if config.sample_times is not None:
        trajectory = [
            (float(s), samples[k] * _phase_correction(e0, e1, t0, s))
            for k, s in enumerate(stops)
        ]
    return EvolutionResult(final, float(drift), int(n_acc), int(n_rej), float(max_drift), trajectory)


def evolve_piecewise_oracle(h: CompositeHamiltonian, psi0, n_slices: int,
                            t_start: float | None = None, t_end: float | None = None) -> np.ndarray:
    if n_slices < 1:
        raise ValueError("n_slices must be >= 1")
    psi = validate_state(psi0, h.dimension).copy()
    t0, t1 = default_span(h.model)
    t0 = t0 if t_start is None else t_start
    t1 = t1 if t_end is None else t_end
    dt = (t1 - t0) / n_slices
    H0 = h.static_part()
    bd = h.sweep_diagonal
    idx = np.diag_indices_from(H0)
    for k in range(n_slices):
        Hk = H0.copy()
        Hk[idx] += (t0 + (k + 0.5) * dt) * bd
        w, V = np.linalg.eigh(Hk)
        psi = V @ (np.exp(-1j * w * dt) * (V.conj().T @ psi))
    return psi


def expm_propagate(H: np.ndarray, psi0, duration: float) -> np.ndarray:
    """exp(-i H duration) psi0 for a constant H, by Pade scaling-and-squaring."""
    return expm(-1j * duration * np.asarray(H)) @ np.asarray(psi0, dtype=complex)
