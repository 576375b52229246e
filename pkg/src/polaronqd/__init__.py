"""Quantum-dot cavity QED spectra with strong exciton-phonon coupling."""

__version__ = "0.1.0"
