"""Cache-aware recommendation engine and evaluation lab for edge caching."""

from .catalog import (
    CacheSet,
    CostVector,
    GraphError,
    GraphFormatError,
    RelationGraph,
    UnknownItemError,
    generate_synthetic,
    load_graph,
    save_graph,
    zipf_weights,
)
from .explore import (
    BfsSchedule,
    DepthPlan,
    ExplorationList,
    RecommendationList,
    bfs_explore,
    overlap_index,
    recommend,
    recommend_cost,
)
from .demand import (
    ConfigError,
    InitialDemand,
    PositionDistribution,
    ScenarioConfig,
    SessionStep,
    SessionTrace,
    load_config,
    position_distribution,
    run_demand,
    simulate_session,
)
from .metrics import chr_conditional, chr_sequential, chr_single, replay_chr, zero_cached_fraction
from .model import ModelParams, chr_closed_form, chr_jensen_bound, chr_monte_carlo
from .placement import build_context, chr_objective, exhaustive_opt, greedy_cache

__version__ = "0.1.0"

__all__ = [
    "BfsSchedule",
    "CacheSet",
    "ConfigError",
    "CostVector",
    "DepthPlan",
    "ExplorationList",
    "GraphError",
    "GraphFormatError",
    "InitialDemand",
    "ModelParams",
    "PositionDistribution",
    "RecommendationList",
    "RelationGraph",
    "ScenarioConfig",
    "SessionStep",
    "SessionTrace",
    "UnknownItemError",
    "bfs_explore",
    "build_context",
    "chr_closed_form",
    "chr_conditional",
    "chr_jensen_bound",
    "chr_monte_carlo",
    "chr_objective",
    "chr_sequential",
    "chr_single",
    "exhaustive_opt",
    "generate_synthetic",
    "greedy_cache",
    "load_config",
    "load_graph",
    "overlap_index",
    "position_distribution",
    "recommend",
    "recommend_cost",
    "replay_chr",
    "run_demand",
    "save_graph",
    "simulate_session",
    "zero_cached_fraction",
    "zipf_weights",
]
