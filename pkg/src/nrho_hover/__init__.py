"""Design and continuation of 1:1 teardrop hovering formations along the
Earth-Moon 9:2 near rectilinear halo orbit (CR3BP)."""

__version__ = "0.1.0"

from .analysis import compare_models, dv_vs_rho, simulate_hover
from .constants import EARTH_MOON, NRHO_PERIOD, convert_units
from .continuation import ContinuationConfig, continue_family, predictor_system, solve_predictor
from .design import (
    RevisitSpec,
    TeardropSolution,
    correct_teardrop,
    design_teardrop,
    linear_velocity_guess,
    min_impulse,
    revisit_position,
    revisit_residual,
    sweep_grid,
)
from .dynamics import eom_derivative, eom_jacobian, jacobi_constant
from .orbit import PeriodicOrbit, monodromy, refine_nrho, spectrum, nominal_nrho, unit_eigenvector
from .propagation import Tolerances, propagate, propagate_with_stm
from .relative import linear_map, nonlinear_relative

__all__ = [
    "ContinuationConfig",
    "EARTH_MOON",
    "NRHO_PERIOD",
    "PeriodicOrbit",
    "RevisitSpec",
    "TeardropSolution",
    "Tolerances",
    "compare_models",
    "continue_family",
    "convert_units",
    "correct_teardrop",
    "design_teardrop",
    "dv_vs_rho",
    "eom_derivative",
    "eom_jacobian",
    "jacobi_constant",
    "linear_map",
    "linear_velocity_guess",
    "min_impulse",
    "monodromy",
    "nonlinear_relative",
    "predictor_system",
    "propagate",
    "propagate_with_stm",
    "refine_nrho",
    "revisit_position",
    "revisit_residual",
    "simulate_hover",
    "solve_predictor",
    "spectrum",
    "sweep_grid",
    "nominal_nrho",
    "unit_eigenvector",
]
