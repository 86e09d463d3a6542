"""Structural and stochastic analysis of mass-action reaction networks."""

from .balance import (
    HypothesisError,
    NumericalFailure,
    balance_report,
    classify_boundary_equilibrium,
    complex_balance_residual,
    local_stability_check,
    ode_rhs,
    solve_complex_balanced_equilibrium,
)
from .network import (
    CRNParseError,
    MassActionSystem,
    ReactionNetwork,
    load_network,
    parse_network,
    rate_function,
    serialize_network,
    stoichiometric_matrix,
)
from .ssa import empirical_distribution, simulate
from .stationary import (
    FiniteDistribution,
    ProductFormDescriptor,
    complex_balanced_distribution_check,
    detect_complex_balance_from_distributions,
    direct_stationary_solve,
    master_equation_residual,
    product_form,
    stochastically_complex_balanced,
    terminal_form_distribution,
    tv_distance,
)
from .statespace import (
    IrreducibleComponent,
    StateBox,
    active_reactions_at,
    certify_essential,
    gamma_system,
    irreducible_components,
    is_positive_component,
    reachable_set,
)
from .structure import analyze_structure, conservation_laws, terminal_component_of, terminal_network

__version__ = "0.1.0"

__all__ = [
    "CRNParseError",
    "FiniteDistribution",
    "HypothesisError",
    "IrreducibleComponent",
    "MassActionSystem",
    "NumericalFailure",
    "ProductFormDescriptor",
    "ReactionNetwork",
    "StateBox",
    "active_reactions_at",
    "analyze_structure",
    "balance_report",
    "certify_essential",
    "classify_boundary_equilibrium",
    "complex_balance_residual",
    "complex_balanced_distribution_check",
    "conservation_laws",
    "detect_complex_balance_from_distributions",
    "direct_stationary_solve",
    "empirical_distribution",
    "gamma_system",
    "irreducible_components",
    "is_positive_component",
    "load_network",
    "local_stability_check",
    "master_equation_residual",
    "ode_rhs",
    "parse_network",
    "product_form",
    "rate_function",
    "reachable_set",
    "serialize_network",
    "simulate",
    "solve_complex_balanced_equilibrium",
    "stochastically_complex_balanced",
    "stoichiometric_matrix",
    "terminal_component_of",
    "terminal_form_distribution",
    "terminal_network",
    "tv_distance",
]
