from .classical import best_deterministic, classical_value
from .search import (
    BoundReport,
    GradientCheck,
    OptimizerConfig,
    default_seeds,
    gradient_check,
    optimal_state,
    optimize_delta,
    seesaw_commuting,
    strategy_to_params,
    witness_bound,
)

__all__ = [
    "BoundReport",
    "GradientCheck",
    "OptimizerConfig",
    "best_deterministic",
    "classical_value",
    "default_seeds",
    "gradient_check",
    "optimal_state",
    "optimize_delta",
    "seesaw_commuting",
    "strategy_to_params",
    "witness_bound",
]
