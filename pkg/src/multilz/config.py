"""Sweep configuration and the JSON files that feed it.

Custom model file (JSON)::

    {
      "A": {"real": [[0, 1, 1], [1, 0, 1], [1, 1, 0]],
            "imag": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]},
      "B": [1, 0, -1],
      "C": [0, 0, 1],
      "omega": 1.2,
      "n_fock": 50
    }

``A`` is in units of Delta and ``B`` in units of the sweep rate v, so a sweep
point with adiabaticity delta uses B * v with v = 1 / (4 delta). ``C`` holds
the coupling coefficients multiplied by g. ``imag``, ``C``, ``omega`` and
``n_fock`` are optional. A bare nested list is accepted for ``A`` when real.

Sweep config file (JSON): any SweepConfig field by name, e.g.
``{"model": "triangle", "couplings": ["c_0_1"], "delta_grid": [0.1, 0.2]}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .model import COUPLING_DIAGONALS, NAMED_MODELS, ModelError, build_custom_model


@dataclass(frozen=True)
class CustomModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray | None = None
    omega: float | None = None
    n_fock: int | None = None

    def __post_init__(self):
        build_custom_model(self.A, self.B)  # validates
        if self.C is not None and len(self.C) != len(self.B):
            raise ModelError("C diagonal length differs from B")


def load_custom_model(path) -> CustomModel:
    raw = json.loads(Path(path).read_text())
    a = raw["A"]
    if isinstance(a, dict):
        A = np.array(a["real"], dtype=float) + 1j * np.array(a.get("imag", 0.0), dtype=float)
    else:
        A = np.array(a, dtype=complex)
    B = np.array(raw["B"], dtype=float)
    C = np.array(raw["C"], dtype=float) if "C" in raw else None
    return CustomModel(A, B, C, raw.get("omega"), raw.get("n_fock"))


def log_grid(lo: float, hi: float, n: int) -> tuple[float, ...]:
    return tuple(float(x) for x in np.geomspace(lo, hi, n))


def lin_grid(lo: float, hi: float, n: int) -> tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(lo, hi, n))


def parse_grid(text: str) -> tuple[float, ...]:
    """``"0.1,0.2,0.5"`` or ``"lo:hi:n"`` (linear) or ``"lo:hi:n:log"``."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if len(parts) > 3 and parts[3] == "log":
            return log_grid(lo, hi, n)
        return lin_grid(lo, hi, n)
    return tuple(float(v) for v in text.split(",") if v)


@dataclass(frozen=True)
class SweepConfig:
    model: str = "equal_slope"
    couplings: tuple[str, ...] = ("c_1_3",)
    delta_grid: tuple[float, ...] = field(default_factory=lambda: log_grid(1e-2, 3.0, 24))
    g_grid: tuple[float, ...] = field(default_factory=lambda: lin_grid(0.0, 4.0, 17))
    omega_over_delta: float = 1.2
    n_fock: int = 50
    rel_tol: float = 1e-8
    t_span: float = 100.0  # sweep window is v t in [-t_span, t_span] (units of Delta)
    readout: str = "eigen"  # "eigen" or "bare"
    leakage_threshold: float = 1e-6
    max_fock: int | None = None  # if set, raise n_fock in steps of fock_step while leakage is too high
    fock_step: int = 20
    output: str | None = None
    workers: int = 1
    record_timing: bool = True
    custom_file: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "couplings", tuple(self.couplings))
        object.__setattr__(self, "delta_grid", tuple(float(x) for x in self.delta_grid))
        object.__setattr__(self, "g_grid", tuple(float(x) for x in self.g_grid))
        if self.model not in NAMED_MODELS and self.model != "custom":
            raise ModelError(f"unknown model {self.model!r}")
        if self.model == "custom" and self.custom_file is None:
            raise ModelError("model 'custom' needs custom_file")
        for c in self.couplings:
            if c not in COUPLING_DIAGONALS and c != "custom_diagonal":
                raise ModelError(f"unknown coupling {c!r}")
        if not self.couplings or not self.delta_grid or not self.g_grid:
            raise ValueError("couplings and grids must be non-empty")
        if any(not d > 0 for d in self.delta_grid):
            raise ValueError("all delta values must be positive")
        if any(not g >= 0 for g in self.g_grid):
            raise ValueError("all g values must be non-negative")
        if self.readout not in ("eigen", "bare"):
            raise ValueError(f"readout must be 'eigen' or 'bare', got {self.readout!r}")
        if not (self.t_span > 0 and math.isfinite(self.t_span)):
            raise ValueError("t_span must be positive")
        if self.max_fock is not None and self.max_fock < self.n_fock:
            raise ValueError("max_fock must be at least n_fock")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def with_overrides(self, **kw) -> "SweepConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def load_sweep_config(path) -> SweepConfig:
    raw = json.loads(Path(path).read_text())
    known = {f.name for f in fields(SweepConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    for key in ("delta_grid", "g_grid"):
        if isinstance(raw.get(key), str):
            raw[key] = parse_grid(raw[key])
    return SweepConfig(**raw)
