"""Simulation and stability diagnostics for scalar conservation laws with x-dependent convex flux."""

from .flux import FluxModel, build_flux, rh_speed, validate_assumptions
from .solver import Grid1D, InitialData, SolutionField, advance, initial_field, run, traces_at

__version__ = "0.1.0"

__all__ = [
    "FluxModel", "Grid1D", "InitialData", "SolutionField", "advance", "build_flux",
    "initial_field", "rh_speed", "run", "traces_at", "validate_assumptions",
]
