"""Sparse approximation via the trimmed lasso and its generalized soft-min
surrogate: stable O(kd) penalty/weight kernel, MM/homotopy optimizers,
baseline methods and a benchmark harness."""

from .baselines import (
    BaselineConfig,
    admm_trimmed_lasso,
    dc_trimmed_lasso,
    irl1,
    irls,
    lasso_sweep,
    ls_omp,
)
from .errors import BudgetError, ConfigError, NumericError
from .kernel import (
    BTable,
    GsmKernelResult,
    mu_btable,
    mu_theta,
    mu_theta_full,
    tau_and_weights,
    tau_value,
)
from .oracles import brute_force_mu_theta, highprec_mu_theta, naive_recursion_mu_theta
from .optimizer import (
    HomotopyConfig,
    Solution,
    homotopy_solve,
    lambda_grid_power1,
    lambda_grid_power2,
    mm_solve,
    postprocess_ambiguous,
    solve_p0,
)
from .problem import (
    PenaltyThresholds,
    ProblemInstance,
    alpha2k_lower_bound,
    majorizer_value,
    objective_value,
    proj_k,
    thresholds,
    trimmed_lasso,
)
from .wl1 import (
    InnerSolverConfig,
    least_squares_on_support,
    solve_wl1_power1,
    solve_wl1_power2,
)

__version__ = "0.1.0"

__all__ = [
    "BTable",
    "BaselineConfig",
    "BudgetError",
    "ConfigError",
    "GsmKernelResult",
    "HomotopyConfig",
    "InnerSolverConfig",
    "NumericError",
    "PenaltyThresholds",
    "ProblemInstance",
    "Solution",
    "admm_trimmed_lasso",
    "alpha2k_lower_bound",
    "brute_force_mu_theta",
    "dc_trimmed_lasso",
    "highprec_mu_theta",
    "homotopy_solve",
    "irl1",
    "irls",
    "lasso_sweep",
    "least_squares_on_support",
    "lambda_grid_power1",
    "lambda_grid_power2",
    "ls_omp",
    "majorizer_value",
    "mm_solve",
    "mu_btable",
    "mu_theta",
    "mu_theta_full",
    "naive_recursion_mu_theta",
    "objective_value",
    "postprocess_ambiguous",
    "proj_k",
    "solve_p0",
    "solve_wl1_power1",
    "solve_wl1_power2",
    "tau_and_weights",
    "tau_value",
    "thresholds",
    "trimmed_lasso",
]
