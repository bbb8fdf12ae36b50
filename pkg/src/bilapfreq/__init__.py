"""Frequency-function laboratory for the biharmonic equation ``Δ²u = Vu``."""

from .fields import GridSpec, PotentialSpec, ScalarField, gradient, laplacian, sup_norm
from .lifting import LiftParams, check_potential_shift, lift_solution, select_params
from .decompose import LiftedSystem, compute_w, residual_biharmonic, residual_second
from .quadrature import Ball, WeightedIntegrals, compute_H, compute_I, compute_h, integrate_ball
from .frequency import (FrequencyProfile, build_profile, check_cancellations, check_H_prime,
                        check_I_prime, fit_monotonicity_constant, geometric_radii)
from .report import CheckReport
from .solutions import (CaseSpec, SolveConfig, build_system, builtin_case, list_cases,
                        manufacture_potential, solve_biharmonic)

__version__ = "0.1.0"
