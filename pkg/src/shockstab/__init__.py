"""Finite-volume Euler solver with MUSCL reconstruction and matrix stability
analysis of captured planar shocks."""

from .euler import (
    AdmissibilityError,
    GasModel,
    conserved_to_primitive,
    physical_flux,
    pressure_from_conserved,
    primitive_to_conserved,
    transform_matrix_dU_dW,
)
from .grid import GridSpec, StructuredGrid, make_cartesian, make_distorted, make_grid
from .muscl import LIMITERS, limiter_value
from .riemann import SOLVERS, numerical_flux, roe_average
from .shock import (
    ConvergenceError,
    SteadyShockConfig,
    build_initial_field,
    fit_growth_rate,
    initial_states,
    intermediate_state,
    run_perturbed_simulation,
    solve_1d_steady,
    steady_mean_field,
)
from .solver import BoundarySpec, FieldState, Scheme, apply_boundaries, march, residual, rk3_step, stable_dt
from .stability import (
    EigenSpectrum,
    StabilityMatrix,
    UnsteadyMeanError,
    assemble_matrix,
    flux_jacobians,
    frozen_matvec,
    spectrum,
    unstable_mode,
)

__version__ = "0.1.0"
