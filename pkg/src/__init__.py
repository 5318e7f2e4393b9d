"""
LTV Gain Analysis

Finite-horizon induced gains of linear time-varying systems: power
iteration, Riccati bisection, the combined algorithm, and the Gramian
L2-to-Euclidean gain, with the disturbances that achieve the bounds.
"""

__version__ = "0.1.0"

from .combined import combined_gain
from .config import AnalysisSettings
from .gramian import l2e_gain, solve_lde, wc_disturbance_l2e
from .ltv_model import LtvSystem, TvMatrixFn, adjoint, validate
from .power_iteration import forward_gain, power_iterate
from .rde_analysis import GainBounds, bisect, initial_bounds, solve_rde
from .signals import Signal

__all__ = [
    "AnalysisSettings",
    "GainBounds",
    "LtvSystem",
    "Signal",
    "TvMatrixFn",
    "adjoint",
    "bisect",
    "combined_gain",
    "forward_gain",
    "initial_bounds",
    "l2e_gain",
    "power_iterate",
    "solve_lde",
    "solve_rde",
    "validate",
    "wc_disturbance_l2e",
]
