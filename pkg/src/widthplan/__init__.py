"""Width-based lookahead planning with critical-path learning.

Simulator-agnostic rollout planners over novelty-pruned lookahead trees, a
policy/value learner trained on executed critical paths behind a statistical
parameter-acceptance schedule, a taxonomy probe for reward sparsity and
branching factor, and a seeded benchmark harness over small deterministic
pixel environments.
"""

from .agents import AgentVariant, PlanningAgent, TrainRunConfig, evaluate, run_episode, run_training
from .envs import make_env, registered_envs
from .features import ExtractorConfig, FeatureExtractor
from .lookahead import LookaheadTree, Node, backup, select_root_action
from .mdp import (
    BudgetedSimulator,
    CriticalPath,
    Environment,
    EpisodeSimulator,
    Observation,
    SimulatorBudget,
    TransitionRecord,
)
from .novelty import NoveltyMode, NoveltyTable
from .planner import PlanConfig, iw1_plan, random_base_policy, riw_plan
from .stats import welch_t_test
from .taxonomy import classify_branching, classify_smrf

__version__ = "0.1.0"

__all__ = [
    "AgentVariant",
    "BudgetedSimulator",
    "CriticalPath",
    "Environment",
    "EpisodeSimulator",
    "ExtractorConfig",
    "FeatureExtractor",
    "LookaheadTree",
    "Node",
    "NoveltyMode",
    "NoveltyTable",
    "Observation",
    "PlanConfig",
    "PlanningAgent",
    "SimulatorBudget",
    "TrainRunConfig",
    "TransitionRecord",
    "backup",
    "classify_branching",
    "classify_smrf",
    "evaluate",
    "iw1_plan",
    "make_env",
    "random_base_policy",
    "registered_envs",
    "riw_plan",
    "run_episode",
    "run_training",
    "select_root_action",
    "welch_t_test",
    "__version__",
]
