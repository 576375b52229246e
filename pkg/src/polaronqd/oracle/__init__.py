"""Brute-force cross-checks: exact diagonalization and time-domain master equation."""
from .exact import DiscreteBath, exact_absorption, exact_lines, operator_green
from .master import KernelState, PolaronMasterEquation, time_domain_spectrum

__all__ = [
    "DiscreteBath",
    "exact_absorption",
    "exact_lines",
    "operator_green",
    "KernelState",
    "PolaronMasterEquation",
    "time_domain_spectrum",
]
