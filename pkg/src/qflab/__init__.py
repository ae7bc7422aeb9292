"""Numerical workbench for generator operators, equilibrium fields,
martingale diagnostics, Crank-Nicolson evolution, and SDE ensembles."""

__version__ = "0.1.0"

from .model import (
    Grid1D,
    Grid2D,
    MarketParams,
    MGParams,
    SDEParams,
    StateVector,
    load_config,
    sample_extended_martingale_state,
    sample_martingale_state,
)
from .operators import (
    OperatorMatrix,
    Potential,
    SimilarityTransform,
    apply_momentum,
    build_bs_hamiltonian,
    build_double_knockout,
    build_effective_bs,
    build_mg_hamiltonian,
    hermiticity_defect,
    similarity_transform,
)
from .martingale import (
    ConstraintRoot,
    MartingaleReport,
    NoRootError,
    cross_parameter_identity,
    extended_constraint_residual,
    martingale_residual,
    mc_martingale_check,
    solve_extended_constraint,
)
from .vacuum import (
    FieldPoint,
    RegimeReport,
    SingularRegimeError,
    VacuumSolution,
    bs_extremum_roots,
    bs_potential_residual,
    bs_vacuum_exact,
    bs_vacuum_strong,
    bs_vacuum_weak,
    classify_information_flow,
    mg_case_solver,
    mg_polynomial_residual,
    mg_regime_solver,
)
from .evolution import (
    EvolutionConfig,
    FlowReport,
    Payoff,
    SingularSolveError,
    evolve,
    kernel_row,
    price_barrier,
    price_option,
)
from .sde import PathEnsemble, export_csv, simulate_gbm, simulate_mg

__all__ = [
    "__version__",
    "ConstraintRoot",
    "EvolutionConfig",
    "FieldPoint",
    "FlowReport",
    "Grid1D",
    "Grid2D",
    "MarketParams",
    "MartingaleReport",
    "MGParams",
    "NoRootError",
    "OperatorMatrix",
    "PathEnsemble",
    "Payoff",
    "Potential",
    "RegimeReport",
    "SDEParams",
    "SimilarityTransform",
    "SingularRegimeError",
    "SingularSolveError",
    "StateVector",
    "VacuumSolution",
    "apply_momentum",
    "bs_extremum_roots",
    "bs_potential_residual",
    "bs_vacuum_exact",
    "bs_vacuum_strong",
    "bs_vacuum_weak",
    "build_bs_hamiltonian",
    "build_double_knockout",
    "build_effective_bs",
    "build_mg_hamiltonian",
    "classify_information_flow",
    "cross_parameter_identity",
    "evolve",
    "export_csv",
    "extended_constraint_residual",
    "hermiticity_defect",
    "kernel_row",
    "load_config",
    "martingale_residual",
    "mc_martingale_check",
    "mg_case_solver",
    "mg_polynomial_residual",
    "mg_regime_solver",
    "price_barrier",
    "price_option",
    "sample_extended_martingale_state",
    "sample_martingale_state",
    "simulate_gbm",
    "simulate_mg",
    "similarity_transform",
    "solve_extended_constraint",
]
