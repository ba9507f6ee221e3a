"""Operators for linearly swept multilevel systems coupled to one oscillator.

Units: hbar = 1 and the gap scale Delta = 1 set the energy unit, so time is
measured in 1/Delta. The composite basis is ordered |i, n> with the system
index i major (flat index ``i * n_fock + n``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

ModelKind = Literal["equal_slope", "bow_tie", "triangle", "two_level", "custom"]
CouplingKind = Literal["c_1_3", "c_3_1", "c_1_1", "c_0_1", "c_1_0", "custom_diagonal"]

HERMITIAN_TOL = 1e-12
DEGENERACY_TOL = 1e-8

# A * 2 / Delta and B / v for the three-level models.
_TABLE = {
    "equal_slope": (
        [[0, 1, 1], [1, 0, 0], [1, 0, 1]],
        [1, -1, -1],
    ),
    "bow_tie": (
        [[0, 1, 0], [1, 0, 1], [0, 1, 0]],
        [1, 0, -1],
    ),
    "triangle": (
        [[0, 1, 0.8], [1, -2, 0.55], [0.8, 0.55, 0]],
        [1, 0, -0.5],
    ),
}

COUPLING_DIAGONALS = {
    "c_1_3": (0.0, 1.0 / 3.0, 1.0),
    "c_3_1": (0.0, 1.0, 1.0 / 3.0),
    "c_1_1": (0.0, 1.0, 1.0),
    "c_0_1": (0.0, 0.0, 1.0),
    "c_1_0": (0.0, 1.0, 0.0),
}

NAMED_MODELS = ("equal_slope", "bow_tie", "triangle", "two_level")


class ModelError(ValueError):
    """Invalid operator or parameter."""


class DegenerateGroundStateError(RuntimeError):
    pass


def _frozen(a, dtype) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ModelSpec:
    kind: str
    A: np.ndarray
    B: np.ndarray
    delta_gap: float = 1.0
    sweep_rate: float = 1.0

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def slopes(self) -> np.ndarray:
        return np.real(np.diag(self.B))


@dataclass(frozen=True, eq=False)
class CouplingSpec:
    kind: str
    g: float
    diagonal: np.ndarray  # coefficients multiplying g

    @property
    def dim(self) -> int:
        return len(self.diagonal)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.g * self.diagonal)

    @property
    def elements(self) -> np.ndarray:
        """Diagonal of C, including the factor g."""
        return self.g * self.diagonal


@dataclass(frozen=True)
class OscillatorSpec:
    omega: float = 1.2
    n_fock: int = 50

    def __post_init__(self):
        if self.n_fock < 2:
            raise ModelError(f"n_fock must be >= 2, got {self.n_fock}")
        if not self.omega > 0:
            raise ModelError(f"omega must be positive, got {self.omega}")

    @property
    def number(self) -> np.ndarray:
        return np.arange(self.n_fock, dtype=float)

    @property
    def position(self) -> np.ndarray:
        """Matrix of a + a^dagger in the truncated Fock basis."""
        off = np.sqrt(np.arange(1, self.n_fock, dtype=float))
        return np.diag(off, 1) + np.diag(off, -1)


def build_model(kind: str, delta_gap: float = 1.0, sweep_rate: float = 1.0) -> ModelSpec:
    """Named model with A scaled by Delta / 2 and B scaled by v.

    The two-level model is H = -(Delta/2) sigma_x + (v t / 2) diag(1, -1),
    labelled so that |1> is the lower diabatic level at negative times, as in
    the three-level models.
    """
    if kind not in NAMED_MODELS:
        raise ModelError(f"unknown model kind {kind!r}; use build_custom_model for custom")
    if delta_gap < 0:
        raise ModelError(f"delta_gap must be non-negative, got {delta_gap}")
    if not sweep_rate > 0:
        raise ModelError(f"sweep_rate must be positive, got {sweep_rate}")
    if kind == "two_level":
        A = -0.5 * delta_gap * np.array([[0.0, 1.0], [1.0, 0.0]])
        B = 0.5 * sweep_rate * np.diag([1.0, -1.0])
    else:
        a, b = _TABLE[kind]
        A = 0.5 * delta_gap * np.array(a, dtype=float)
        B = sweep_rate * np.diag(np.array(b, dtype=float))
    return ModelSpec(kind, _frozen(A, complex), _frozen(B, float), float(delta_gap), float(sweep_rate))


def build_custom_model(A, B) -> ModelSpec:
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B)
    if B.ndim == 1:
        B = np.diag(B)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ModelError(f"A must be square, got shape {A.shape}")
    if B.shape != A.shape:
        raise ModelError(f"dimension mismatch: A {A.shape}, B {B.shape}")
    if np.max(np.abs(A - A.conj().T)) > HERMITIAN_TOL:
        raise ModelError("A is not Hermitian")
    if np.iscomplexobj(B):
        if np.max(np.abs(B.imag)) > HERMITIAN_TOL:
            raise ModelError("B must be real")
        B = B.real
    if np.max(np.abs(B - np.diag(np.diag(B)))) > 0:
        raise ModelError("B must be diagonal")
    return ModelSpec("custom", _frozen(A, complex), _frozen(B, float), 1.0, 1.0)


def build_coupling(kind: str, g: float, dimension: int = 3, diagonal=None) -> CouplingSpec:
    if g < 0:
        raise ModelError(f"coupling strength must be non-negative, got {g}")
    if kind == "custom_diagonal":
        if diagonal is None:
            raise ModelError("custom_diagonal coupling needs explicit diagonal coefficients")
        diag = np.asarray(diagonal, dtype=float)
        if diag.shape != (dimension,):
            raise ModelError(f"diagonal has length {diag.size}, expected {dimension}")
    elif kind in COUPLING_DIAGONALS:
        if dimension != 3:
            raise ModelError(f"coupling {kind!r} is defined for three levels, not {dimension}")
        diag = np.array(COUPLING_DIAGONALS[kind])
    else:
        raise ModelError(f"unknown coupling kind {kind!r}")
    return CouplingSpec(kind, float(g), _frozen(diag, float))


def shift_corrected_A(model: ModelSpec, coupling: CouplingSpec, omega: float) -> np.ndarray:
    """Static operator with the polaron shifts C_ii^2 / omega added back.

    The coupling is diagonal in the computational basis, which is an eigenbasis
    of B even when B is degenerate, so the correction is a diagonal add-on.
    """
    if not omega > 0:
        raise ModelError(f"omega must be positive, got {omega}")
    if coupling.dim != model.dim:
        raise ModelError(f"coupling dimension {coupling.dim} != model dimension {model.dim}")
    c = coupling.elements
    out = np.array(model.A, dtype=complex)
    out[np.diag_indices_from(out)] += c**2 / omega
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class CompositeHamiltonian:
    """H(t) = A~ (x) I + t B (x) I + I (x) omega a^dag a + C (x) (a + a^dag)."""

    model: ModelSpec
    coupling: CouplingSpec
    oscillator: OscillatorSpec
    A_tilde: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(
            self, "A_tilde", shift_corrected_A(self.model, self.coupling, self.oscillator.omega)
        )

    @property
    def d(self) -> int:
        return self.model.dim

    @property
    def n_fock(self) -> int:
        return self.oscillator.n_fock

    @property
    def dimension(self) -> int:
        return self.d * self.n_fock

    @property
    def sweep_diagonal(self) -> np.ndarray:
        """Diagonal of B (x) I, the coefficient of t."""
        return np.repeat(self.model.slopes, self.n_fock)

    def static_part(self) -> np.ndarray:
        osc = self.oscillator
        eye_s = np.eye(self.d)
        eye_o = np.eye(self.n_fock)
        return (
            np.kron(self.A_tilde, eye_o)
            + np.kron(eye_s, np.diag(osc.omega * osc.number))
            + np.kron(self.coupling.matrix, osc.position)
        )

    def at(self, t: float) -> np.ndarray:
        H = self.static_part()
        H[np.diag_indices_from(H)] += t * self.sweep_diagonal
        return H


def composite(model: ModelSpec, coupling: CouplingSpec, oscillator: OscillatorSpec | None = None):
    return CompositeHamiltonian(model, coupling, oscillator or OscillatorSpec())


def hamiltonian_at(h: CompositeHamiltonian, t: float) -> np.ndarray:
    return h.at(t)


def default_span(model: ModelSpec) -> tuple[float, float]:
    """Sweep window v t in [-100 Delta, 100 Delta]."""
    t = 100.0 * model.delta_gap / model.sweep_rate
    return -t, t


def fix_phase(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return vec * (abs(vec[k]) / vec[k])


def ground_state(h: CompositeHamiltonian, t: float | None = None) -> np.ndarray:
    """Lowest eigenvector of H(t) (default: start of the sweep window).

    Raises DegenerateGroundStateError when the two lowest levels are closer
    than 1e-8 Delta.
    """
    if t is None:
        t = default_span(h.model)[0]
    w, V = np.linalg.eigh(h.at(t))
    if w[1] - w[0] < DEGENERACY_TOL * (h.model.delta_gap or 1.0):
        raise DegenerateGroundStateError(
            f"lowest pair split by {w[1] - w[0]:.3e} at t={t}; ground state is ambiguous"
        )
    psi = fix_phase(V[:, 0].astype(complex))
    return psi / np.linalg.norm(psi)


def validate_state(psi, dimension: int, tol: float = 1e-9) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.size != dimension:
        raise ModelError(f"state has length {psi.size}, expected {dimension}")
    nrm = np.linalg.norm(psi)
    if abs(nrm - 1.0) > tol:
        raise ModelError(f"state is not normalized (norm {nrm:.12f})")
    return psi
