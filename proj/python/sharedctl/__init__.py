"""Strategy repair for shared control."""

from ._core import (
    ConfigError,
    DomainError,
    Mdp,
    ModelError,
    SpecInfeasible,
    Strategy,
    StrategyMismatch,
    blend,
    extract_autonomy,
    gridworld,
    reach_probability,
    sample_bound,
    synthesize,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "Mdp",
    "ModelError",
    "SpecInfeasible",
    "Strategy",
    "StrategyMismatch",
    "blend",
    "extract_autonomy",
    "gridworld",
    "reach_probability",
    "sample_bound",
    "synthesize",
]
