"""Population readout and closed-form reference curves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import eval_genlaguerre, gammaln

# Triangle-model crossing parameters: couplings 0.8 (1-3) and 0.55 (2-3) in
# units of Delta/2, slope differences 1.5 and 0.5 in units of v.
_TRIANGLE_13 = 0.8**2 / 1.5
_TRIANGLE_23 = 0.55**2 / 0.5


def _blocks(psi, d: int) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.size % d:
        raise ValueError(f"state length {psi.size} is not a multiple of d={d}")
    return np.abs(psi.reshape(d, -1)) ** 2


def system_populations(psi, d: int, n_fock: int | None = None) -> np.ndarray:
    """P_i = sum_n |<i, n|psi>|^2 (projection onto bare system states)."""
    w = _blocks(psi, d)
    if n_fock is not None and w.shape[1] != n_fock:
        raise ValueError(f"state has {w.shape[1]} Fock levels per block, expected {n_fock}")
    return w.sum(axis=1)


def oscillator_populations(psi, d: int) -> np.ndarray:
    """Q_n = sum_i |<i, n|psi>|^2."""
    return _blocks(psi, d).sum(axis=0)


def top_fock_leakage(psi, d: int, levels: int = 2) -> float:
    """Weight in the highest ``levels`` retained Fock states."""
    return float(oscillator_populations(psi, d)[-levels:].sum())


@dataclass(frozen=True)
class EigenReadout:
    populations: np.ndarray
    purity: float  # smallest dominant-block weight among the eigenvectors used


def eigenbasis_populations(H: np.ndarray, psi, d: int, weight_floor: float = 1e-14) -> EigenReadout:
    """Classify eigenstates of H by their dominant system block and sum |<e_k|psi>|^2.

    Meant for the end of a sweep, where every eigenstate of the composite
    Hamiltonian lives almost entirely inside one eigenspace of B.
    """
    psi = np.asarray(psi, dtype=complex)
    _, V = np.linalg.eigh(H)
    block_weight = (np.abs(V.reshape(d, -1, V.shape[1])) ** 2).sum(axis=1)
    label = np.argmax(block_weight, axis=0)
    amp = np.abs(V.conj().T @ psi) ** 2
    pops = np.bincount(label, weights=amp, minlength=d)
    used = amp > weight_floor
    purity = float(block_weight[label, np.arange(V.shape[1])][used].min()) if used.any() else 1.0
    return EigenReadout(pops, purity)


def validate_populations(p, tol: float = 1e-6) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if np.any(p < -tol) or np.any(p > 1 + tol):
        raise ValueError(f"probabilities out of [0, 1]: {p}")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"probabilities sum to {p.sum():.9f}")
    return p


def lz_probability(delta):
    """Probability to stay in the initial diabatic state, exp(-2 pi delta)."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta < 0):
        raise ValueError("delta must be non-negative")
    out = np.exp(-2 * np.pi * delta)
    return float(out) if out.ndim == 0 else out


def bowtie_strong_decoherence(delta) -> np.ndarray:
    """(P1, P2, P3) for the bow-tie model when the 1-2 and 2-3 crossings are
    passed one after the other with no interference. Shape (..., 3)."""
    p = np.asarray(lz_probability(delta))
    return np.stack([p, (1 - p) * p, (1 - p) ** 2], axis=-1)


def triangle_incoherent(delta) -> np.ndarray:
    """(P1, P2, P3) for the triangle model from incoherent sequential LZ steps."""
    delta = np.asarray(delta, dtype=float)
    a = lz_probability(delta)
    b = np.exp(-2 * np.pi * delta * _TRIANGLE_13)
    c = np.exp(-2 * np.pi * delta * _TRIANGLE_23)
    p1 = a * b
    p2 = (1 - a) * c + a * (1 - b) * (1 - c)
    p3 = a * (1 - b) * c + (1 - a) * (1 - c)
    return np.stack([p1, p2, p3], axis=-1)


@dataclass(frozen=True)
class GapSequence:
    alpha: float
    gaps: np.ndarray

    @property
    def weights(self) -> np.ndarray:
        return self.gaps**2

    @property
    def mean(self) -> float:
        w = self.weights
        return float(np.arange(w.size) @ w / w.sum())


def gap_sequence(alpha: float, n_max: int) -> GapSequence:
    """Relative gaps alpha^n exp(-alpha^2/2) L_0^(n)(alpha^2) / sqrt(n!), n = 0..n_max.

    L_0^(n) is the degree-0 generalized Laguerre polynomial, identically 1, so
    this is |<n|D(alpha)|0>|, the overlap of a displaced vacuum with Fock
    state n, and the squared gaps are Poisson weights with mean alpha^2.
    """
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    n = np.arange(n_max + 1)
    if alpha == 0:
        gaps = (n == 0).astype(float)
    else:
        log_mag = n * np.log(alpha) - alpha**2 / 2 - 0.5 * gammaln(n + 1)
        gaps = np.exp(log_mag) * eval_genlaguerre(0, n, alpha**2)
    return GapSequence(float(alpha), gaps)


class Peak(NamedTuple):
    x: float
    value: float
    interior: bool


def peak_of(x, values) -> Peak:
    """Grid maximum refined by a parabola through the argmax and its neighbours.

    ``interior`` is False when the maximum sits on an endpoint; the endpoint
    sample is returned unrefined.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(values, dtype=float)
    if x.size == 0 or y.size == 0:
        raise ValueError("peak_of needs non-empty input")
    if x.shape != y.shape:
        raise ValueError("grid and values differ in length")
    k = int(np.argmax(y))
    if k == 0 or k == x.size - 1:
        return Peak(float(x[k]), float(y[k]), False)
    c2, c1, c0 = np.polyfit(x[k - 1 : k + 2], y[k - 1 : k + 2], 2)
    if c2 >= 0:
        return Peak(float(x[k]), float(y[k]), True)
    xv = -c1 / (2 * c2)
    return Peak(float(xv), float(c0 - c1**2 / (4 * c2)), True)
