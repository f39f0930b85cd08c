"""Finite-volume and kinetic solvers for the 1-D aggregation equation with pointy potentials."""

from .grid import ContractError, Grid1D, MassMismatchError, VelocityGrid, cumulative_mass, trapezoid, wasserstein1
from .potential import ConfigurationError, FieldSolver, PointyPotential, PotentialField, compute_field
from .macro import (CFLError, InvariantError, MacroState, VelocityLaw, cfl_dt, macro_step, naive_velocity,
                    run_macro, sup_velocity_bound, volpert_velocity)
from .kinetic import EquilibriumModel, KineticState, ap_step_lie, ap_step_strang, run_kinetic
from .models import ParticleSystem, burgers_reference_step, particle_evolve, preset, preset_names
from .diagnostics import StepReport, blowup_indicator, compare_ap, refinement_study, report

__version__ = "0.1.0"

__all__ = [
    "ContractError", "Grid1D", "MassMismatchError", "VelocityGrid", "cumulative_mass", "trapezoid",
    "wasserstein1", "ConfigurationError", "FieldSolver", "PointyPotential", "PotentialField",
    "compute_field", "CFLError", "InvariantError", "MacroState", "VelocityLaw", "cfl_dt", "macro_step",
    "naive_velocity", "run_macro", "sup_velocity_bound", "volpert_velocity", "EquilibriumModel",
    "KineticState", "ap_step_lie", "ap_step_strang", "run_kinetic", "ParticleSystem",
    "burgers_reference_step", "particle_evolve", "preset", "preset_names", "StepReport",
    "blowup_indicator", "compare_ap", "refinement_study", "report",
]
