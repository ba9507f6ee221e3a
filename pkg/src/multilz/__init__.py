"""Landau-Zener sweeps of multilevel systems longitudinally coupled to a harmonic oscillator."""

__version__ = "0.1.0"
