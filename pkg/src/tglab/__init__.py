"""Dense verification toolkit for two-grid convergence theory of nonsymmetric problems."""

from .analysis import (
    ConvergenceReport,
    TwoGridSetup,
    build_report,
    delta_tg,
    e_itg,
    e_tg,
    inexact_bounds,
    lemma41_identities,
    make_setup,
    measured_factor,
    mu_spectrum,
    nonlinear_bound,
    optimal_bound,
    sigma_tg,
    verify_monotonicity,
    verify_nonlinear,
    verify_randomized,
)
from .coarse import (
    alpha_bounds,
    beta_to_alpha,
    cg_solver,
    exact_solver,
    linear_diagnostics,
    randomized_solver,
    stationary_solver,
)
from .problems import ProblemMatrix, convdiff_1d, convdiff_2d, load_problem, random_npd
from .smoothing import auto_scale, build_smoother, smoother_floor
from .transfer import (
    aggregation_restriction,
    build_transfer,
    injection_restriction,
    optimal_restriction,
    random_restriction,
)

__version__ = "0.1.0"
