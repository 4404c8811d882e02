"""Simulation of non-colliding particle SDEs by semi-implicit schemes.

The package provides the model (coefficient catalog, interaction matrix,
particle system), seeded Brownian grids with exact dyadic coarsening, the
barrier-Newton solver for the per-step implicit system, Milstein and
Euler-Maruyama semi-implicit path drivers, and a coupled-path Monte Carlo
harness that fits empirical strong convergence orders.
"""
from .brownian import IncrementGrid, coarsen, generate, split
from .convergence import (
    DegenerateFit,
    ExperimentConfig,
    MseEntry,
    MseTable,
    RateFit,
    RateReport,
    fit_rate,
    moment_diagnostics,
    ordering_sweep,
    run_mse_experiment,
    scheme_coincidence,
    strong_error_vs_exact,
)
from .model import (
    InteractionMatrix,
    ParticleSystem,
    ScalarField,
    field_from_name,
    full_coupling,
    nearest_neighbor,
    singular_drift,
    uniform_system,
    validate_system,
)
from .schemes import PathAborted, Scheme, Trajectory, siem_step, sim_step, simulate_path
from .solver import (
    ImplicitProblem,
    NonConvergence,
    SolverOptions,
    newton_solve,
    residual,
    solve,
    solve_pair_closed_form,
)

__version__ = "0.1.0"
