"""
fidscan - Fidelity, partition-function ratio and Uhlmann overlap across the
thermal phase transitions of the Stoner-Hubbard and BCS mean-field models
"""

__version__ = "0.1.0"
__author__ = "Fidelity Scan Team"

from .core.models import BcsParams, RunConfig, StonerParams, SweepGrid, SweepSpec
from .core.oracle import run_oracle_suites
from .core.scanner import detect_critical_line, locate_fidelity_dip, run_sweep

__all__ = [
    "BcsParams",
    "RunConfig",
    "StonerParams",
    "SweepGrid",
    "SweepSpec",
    "detect_critical_line",
    "locate_fidelity_dip",
    "run_oracle_suites",
    "run_sweep",
]
