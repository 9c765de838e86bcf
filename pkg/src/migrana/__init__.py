"""Refugee migration network toolkit.

Country indicators are scored with a linear model, countries are split into
exporters and importers, and refugees are routed over a directed country
network with a min-cost max-flow solver. Supporting pieces cover population
dynamics, scenario perturbation and Hungarian overflow assignment.
"""

from migrana.assignment import Assignment, reduce_matrix, solve_assignment
from migrana.countries import (
    CountryRecord,
    CountryTable,
    MaxScaler,
    load_country_table,
    standardize,
    validate_table,
)
from migrana.dynamics import (
    EnvironmentalSeries,
    PopulationState,
    TransitionMatrix,
    evolve_population,
    fit_control_ability,
    reallocation_shares,
    steady_state,
)
from migrana.errors import ConvergenceError, InputError, MigranaError, SolveError
from migrana.flow import (
    FlowPlan,
    RouteAllocation,
    all_pairs_shortest,
    allocate_routes,
    solve_min_cost_flow,
)
from migrana.network import (
    MigrationEdge,
    MigrationNetwork,
    MigrationNode,
    NodeRole,
    acceptance_capacity,
    build_network,
    classify_roles,
    edge_difficulty,
)
from migrana.perturbation import (
    NgoInsertion,
    ScenarioEvent,
    apply_event,
    external_difficulty,
    insert_ngo_node,
)
from migrana.regression import (
    OLSRegression,
    StepwiseRegression,
    diagnostics,
    ols_fit,
    stepwise_select,
)
from migrana.scoring import (
    FULL,
    REDUCED,
    CoefficientPreset,
    DistributionScore,
    DistributionScorer,
    distribution_score,
    edge_velocity,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "CoefficientPreset",
    "ConvergenceError",
    "CountryRecord",
    "CountryTable",
    "DistributionScore",
    "DistributionScorer",
    "EnvironmentalSeries",
    "FULL",
    "FlowPlan",
    "InputError",
    "MaxScaler",
    "MigranaError",
    "MigrationEdge",
    "MigrationNetwork",
    "MigrationNode",
    "NgoInsertion",
    "NodeRole",
    "OLSRegression",
    "PopulationState",
    "REDUCED",
    "RouteAllocation",
    "ScenarioEvent",
    "SolveError",
    "StepwiseRegression",
    "TransitionMatrix",
    "acceptance_capacity",
    "all_pairs_shortest",
    "allocate_routes",
    "apply_event",
    "build_network",
    "classify_roles",
    "diagnostics",
    "distribution_score",
    "edge_difficulty",
    "edge_velocity",
    "evolve_population",
    "external_difficulty",
    "fit_control_ability",
    "insert_ngo_node",
    "load_country_table",
    "ols_fit",
    "reallocation_shares",
    "reduce_matrix",
    "solve_assignment",
    "standardize",
    "stepwise_select",
    "steady_state",
    "validate_table",
]
