"""Entropy-dissipating flows for (nonlinear) Fokker-Planck equations on graphs.

The package is organized around a discrete transport metric on positive
probability densities over a finite graph: free energies decay along the
upwind flux dynamics, equilibria are Gibbs measures, and exponential
decay rates can be estimated by a variational principle and checked
against closed forms and fitted trajectories.
"""

from .config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_config,
    serialize_config,
)
from .drift import DriftSpec, drift_eval, duffing_drift, van_der_pol_drift
from .dynamics import (
    FlowProblem,
    MassConservationError,
    StepRejected,
    StiffnessError,
    Trajectory,
    TrajectorySample,
    dissipation,
    drift_problem,
    euler_step,
    general_rhs,
    gradient_flow_rhs,
    gradient_problem,
    integrate,
    stable_step_bound,
)
from .energy import (
    POSITIVITY_FLOOR,
    ConvergenceError,
    FreeEnergySpec,
    build_interaction_matrix,
    build_potential_vector,
    check_density,
    energy_gradient,
    energy_hessian,
    free_energy,
    gibbs_fixed_point,
    gibbs_map,
    gibbs_residual,
)
from .experiment import (
    count_strict_local_maxima,
    rate_report,
    run_experiment,
)
from .graph import (
    Graph,
    build_cycle_1d,
    build_lattice_2d,
    build_path_lattice_1d,
    largest_component_mask,
    subgraph,
)
from .metric import (
    SingularSystemError,
    graph_gradient,
    metric_inner_product,
    solve_potential,
    tau_matrix,
    upwind_weights,
    weighted_divergence,
)
from .rate import (
    EstimationError,
    FitError,
    RateReport,
    cycle_matrix_spectrum,
    fit_asymptotic_rate,
    hessian_double_edge_sum,
    lambda_cycle_entropy_exact,
    lambda_estimate,
    lambda_lattice_entropy_exact,
    lambda_objective,
    second_derivative_diagnostic,
)
from .studies import periodic_heat_convergence, rates_table

__version__ = "0.1.0"

__all__ = [
    "POSITIVITY_FLOOR",
    "ConfigError",
    "ConvergenceError",
    "DriftSpec",
    "EstimationError",
    "ExperimentConfig",
    "FitError",
    "FlowProblem",
    "FreeEnergySpec",
    "Graph",
    "MassConservationError",
    "RateReport",
    "SingularSystemError",
    "StepRejected",
    "StiffnessError",
    "Trajectory",
    "TrajectorySample",
    "build_cycle_1d",
    "build_interaction_matrix",
    "build_lattice_2d",
    "build_path_lattice_1d",
    "build_potential_vector",
    "check_density",
    "count_strict_local_maxima",
    "cycle_matrix_spectrum",
    "dissipation",
    "drift_eval",
    "drift_problem",
    "duffing_drift",
    "energy_gradient",
    "energy_hessian",
    "euler_step",
    "fit_asymptotic_rate",
    "free_energy",
    "general_rhs",
    "gibbs_fixed_point",
    "gibbs_map",
    "gibbs_residual",
    "gradient_flow_rhs",
    "gradient_problem",
    "graph_gradient",
    "hessian_double_edge_sum",
    "integrate",
    "lambda_cycle_entropy_exact",
    "lambda_estimate",
    "lambda_lattice_entropy_exact",
    "lambda_objective",
    "largest_component_mask",
    "load_config",
    "metric_inner_product",
    "parse_config",
    "periodic_heat_convergence",
    "rate_report",
    "rates_table",
    "run_experiment",
    "second_derivative_diagnostic",
    "serialize_config",
    "solve_potential",
    "stable_step_bound",
    "subgraph",
    "tau_matrix",
    "upwind_weights",
    "van_der_pol_drift",
    "weighted_divergence",
]
