"""Sojourn times and throughput of a picker serving two rotating carousels.

The package has two independent routes to the same quantities: an integral
equation solver for the strategies whose stationary law has a tractable
operator, and a simulator that covers all seven picking strategies.
"""

from .densities import OrderSizeModel, StrategyId
from .numerics import DomainError, GridFunction
from .simulator import (
    CompareRow,
    Scenario,
    SimConfig,
    SimulationSummary,
    compare_strategies,
    generate_order,
    ks_distance,
    prep_and_travel,
    run_simulation,
)
from .solver import (
    ConvergenceError,
    SolverConfig,
    SolveResult,
    apply_operator,
    closed_form_single_item_bi,
    contraction_bound,
    solve_sojourn,
    solve_variable_uni,
)

__version__ = "0.1.0"

__all__ = [
    "CompareRow",
    "ConvergenceError",
    "DomainError",
    "GridFunction",
    "OrderSizeModel",
    "Scenario",
    "SimConfig",
    "SimulationSummary",
    "SolveResult",
    "SolverConfig",
    "StrategyId",
    "apply_operator",
    "closed_form_single_item_bi",
    "compare_strategies",
    "contraction_bound",
    "generate_order",
    "ks_distance",
    "prep_and_travel",
    "run_simulation",
    "solve_sojourn",
    "solve_variable_uni",
]
