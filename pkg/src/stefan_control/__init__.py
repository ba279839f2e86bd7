"""Discrete control and spectral toolkit for the linearized Stefan problem with surface tension."""

from .model import (ControlField, ControlRegion, DomainConfig, GridSpec, State,
                    curvature, discrete_energy, nonlinear_boundary_term, preset_initial_data)
from .assembly import assemble_control_injection, assemble_mode_operator, assemble_system
from .stepper import Trajectory, cn_step, simulate, simulate_adjoint
from .spectral import branch_root, eigenfunction, spectral_checks, spectrum, subcritical_root, window_mass
from .control import (backend_agreement, observability_cost, per_frequency_control,
                      series_lemma, solve_minimal_norm_control, zeroth_mode_control)
from .synthesis import (decay_rate_check, dft_modes, inverse_modes, lr_synthesize,
                        mode_invariance_check, project_low)

__all__ = [
    "ControlField", "ControlRegion", "DomainConfig", "GridSpec", "State", "curvature",
    "discrete_energy", "nonlinear_boundary_term", "preset_initial_data",
    "assemble_control_injection", "assemble_mode_operator", "assemble_system",
    "Trajectory", "cn_step", "simulate", "simulate_adjoint",
    "branch_root", "eigenfunction", "spectral_checks", "spectrum", "subcritical_root",
    "window_mass", "backend_agreement", "observability_cost", "per_frequency_control",
    "series_lemma", "solve_minimal_norm_control", "zeroth_mode_control",
    "decay_rate_check", "dft_modes", "inverse_modes", "lr_synthesize",
    "mode_invariance_check", "project_low",
]
