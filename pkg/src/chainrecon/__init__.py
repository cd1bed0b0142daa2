"""Kill-chain inference over a technique catalog.

Builds a phase-ordered decision process from technique embeddings,
scores candidate chains with a multi-objective reward, and searches for
the most plausible seven-phase chain with policy-value guided tree
search. Includes behavioral evaluation of inferred chains against
threat-actor histories.
"""

from .catalog import (
    Catalog,
    CatalogError,
    Phase,
    PHASES,
    Technique,
    build_catalog,
    load_catalog,
    save_catalog,
)
from .config import ConfigError, EngineConfig, load_engine_config, save_engine_config
from .embeddings import (
    Embedding,
    EmbeddingError,
    EmbeddingStore,
    PhasePriors,
    build_store,
    compute_phase_priors,
    cosine,
    load_embeddings,
    load_prior_override,
    normalize,
    save_embeddings,
)
from .evaluation import (
    ActorHistory,
    EnvelopeReport,
    EvaluationError,
    convex_hull_2d,
    envelope_report,
    load_history,
    nnba,
    pca_project,
)
from .mcts import (
    HeuristicEvaluator,
    PvnEvaluator,
    SearchConfig,
    SearchError,
    SearchNode,
    SearchResult,
    backpropagate,
    blend_priors,
    generate_training_data,
    puct_score,
    root_parallel_search,
    search,
)
from .mdp import (
    KernelError,
    RolloutConfig,
    TransitionKernel,
    build_kernel,
    chain_payoff_reward,
    constant_step_reward,
    incremental_step_reward,
    load_kernel,
    rollout_value,
    sample_rollout,
    save_kernel,
)
from .pvn import (
    PvnConfig,
    PvnError,
    PvnOutput,
    PvnWeights,
    backward,
    forward,
    init_weights,
    load_weights,
    loss,
    save_weights,
    train_step,
)
from .reward import (
    PartialPath,
    RewardBreakdown,
    RewardError,
    RewardWeights,
    ScoringContext,
    make_path,
    total_reward,
)

__version__ = "0.1.0"

__all__ = [
    "ActorHistory",
    "Catalog",
    "CatalogError",
    "ConfigError",
    "Embedding",
    "EmbeddingError",
    "EmbeddingStore",
    "EngineConfig",
    "EnvelopeReport",
    "EvaluationError",
    "HeuristicEvaluator",
    "KernelError",
    "PHASES",
    "PartialPath",
    "Phase",
    "PhasePriors",
    "PvnConfig",
    "PvnError",
    "PvnEvaluator",
    "PvnOutput",
    "PvnWeights",
    "RewardBreakdown",
    "RewardError",
    "RewardWeights",
    "RolloutConfig",
    "ScoringContext",
    "SearchConfig",
    "SearchError",
    "SearchNode",
    "SearchResult",
    "Technique",
    "TransitionKernel",
    "backpropagate",
    "backward",
    "blend_priors",
    "build_catalog",
    "build_kernel",
    "build_store",
    "compute_phase_priors",
    "chain_payoff_reward",
    "constant_step_reward",
    "convex_hull_2d",
    "cosine",
    "envelope_report",
    "forward",
    "generate_training_data",
    "incremental_step_reward",
    "init_weights",
    "load_catalog",
    "load_embeddings",
    "load_engine_config",
    "load_history",
    "load_kernel",
    "load_prior_override",
    "load_weights",
    "loss",
    "make_path",
    "nnba",
    "normalize",
    "pca_project",
    "puct_score",
    "rollout_value",
    "root_parallel_search",
    "sample_rollout",
    "save_catalog",
    "save_embeddings",
    "save_engine_config",
    "save_kernel",
    "save_weights",
    "search",
    "total_reward",
    "train_step",
]
