"""The planning-and-learning outer loop and its ablations.

Five agent variants share one episode driver: per decision step the rollout
planner enriches the lookahead under a fresh interaction budget, the root
action is the backup argmax (with learned termination costs at non-terminal
leaves for the learning variants), the tree advances along the executed edge,
and the transition joins the episode's critical path.

Training loops over intervals measured in fresh simulator interactions. Each
interval's critical-path transitions train a candidate parameter set from the
incumbent; the candidate provisionally generates the next interval's episodes
and is accepted only if the t-test schedule does not indicate the incumbent
was better.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

import numpy as np

from .errors import NonFiniteLoss
from .features import MODE_RAW_PIXEL, FeatureExtractor
from .learner import (
    FitConfig,
    ParameterSet,
    build_policy_batch,
    build_value_batch,
    fit_policy,
    fit_value,
    schedule_decision,
)
from .lookahead import LookaheadTree, select_root_action
from .mdp import BudgetedSimulator, CriticalPath, Environment, TransitionRecord
from .nets import HEAD_LINEAR, HEAD_SOFTMAX, MLPApproximator
from .novelty import NoveltyMode, NoveltyTable
from .planner import AdmissionRecord, PlanConfig, random_base_policy, riw_plan


class AgentVariant(Enum):
    NCPL = "ncpl"
    NCPL_D = "ncpl-d"
    CPL = "cpl"
    RIW_C = "riw-c"
    RIW_D = "riw-d"

    @property
    def novelty_mode(self) -> NoveltyMode:
        return {
            AgentVariant.NCPL: NoveltyMode.CLASSIC,
            AgentVariant.NCPL_D: NoveltyMode.DEPTH,
            AgentVariant.CPL: NoveltyMode.NONE,
            AgentVariant.RIW_C: NoveltyMode.CLASSIC,
            AgentVariant.RIW_D: NoveltyMode.DEPTH,
        }[self]

    @property
    def learns(self) -> bool:
        return self in (AgentVariant.NCPL, AgentVariant.NCPL_D, AgentVariant.CPL)


@dataclass(frozen=True)
class TrainRunConfig:
    total_budget: int = 200_000
    plan_budget: int = 100
    horizon: int = 100
    interval_budget: int = 50_000
    eval_episodes: int = 10
    episode_cap: int = 1_200
    gamma: float = 0.99
    hidden: tuple[int, ...] = (64, 64)
    policy_fit: FitConfig = field(default_factory=FitConfig)
    value_fit: FitConfig = field(default_factory=FitConfig)
    target_refresh_steps: int = 10_000
    feature_mode: str = MODE_RAW_PIXEL
    reward_clip: float | None = None
    novelty_reset_per_step: bool = False  # ablation: fresh tables every decision
    novelty_override: str | None = None  # ablation: replace the variant's mode

    def plan_config(self, mode: NoveltyMode) -> PlanConfig:
        if self.novelty_override is not None:
            mode = NoveltyMode(self.novelty_override)
        return PlanConfig(budget=self.plan_budget, horizon=self.horizon, novelty=mode)


def full_run_config() -> TrainRunConfig:
    """Full-scale settings: 2e7-interaction training, 1e6-interaction intervals."""
    return TrainRunConfig(total_budget=20_000_000, interval_budget=1_000_000)


def desk_run_config() -> TrainRunConfig:
    """Budgets scaled down 100x for single-core desk runs."""
    return TrainRunConfig(
        total_budget=200_000,
        interval_budget=50_000,
        episode_cap=300,
        policy_fit=FitConfig(learning_rate=5e-3),
        value_fit=FitConfig(learning_rate=5e-2),
        target_refresh_steps=500,
    )


@dataclass
class IntervalLogRow:
    interval: int
    sim_used: int
    episodes: int
    mean_return: float
    p_value: float | None
    accepted: bool


class PlanningAgent:
    """One variant's planner plus (for learning variants) its parameters."""

    def __init__(
        self,
        variant: AgentVariant,
        env: Environment,
        cfg: TrainRunConfig,
        seed: int = 0,
    ):
        self.variant = variant
        self.env = env
        self.cfg = cfg
        self.plan_cfg = cfg.plan_config(variant.novelty_mode)
        obs = env.observe(env.initial_state())
        self.extractor = FeatureExtractor.for_observation(obs, mode=cfg.feature_mode)
        self.params: ParameterSet | None = None
        if variant.learns:
            ss = np.random.SeedSequence([seed, 0xA9E7])
            pol_seed, val_seed = ss.spawn(2)
            self.params = ParameterSet(
                policy=MLPApproximator.create(
                    obs, env.n_actions, HEAD_SOFTMAX, cfg.hidden,
                    seed=int(pol_seed.generate_state(1)[0]),
                ),
                value=MLPApproximator.create(
                    obs, env.n_actions, HEAD_LINEAR, cfg.hidden,
                    seed=int(val_seed.generate_state(1)[0]),
                ),
            )

    def base_policy(self):
        if self.params is None:
            return random_base_policy(self.env.n_actions)
        return self.params.policy.predict_policy

    def termination_cost(self):
        """Cost assigned to non-terminal leaves; terminal leaves are always 0."""
        if self.params is None:
            return (lambda obs: 0.0), None
        return self.params.value.predict_value, self.params.value.predict_value_batch


def run_episode(
    agent: PlanningAgent,
    sim: BudgetedSimulator,
    rng: np.random.Generator,
    episode_cap: int | None = None,
    global_budget: int | None = None,
    admission_log: list[AdmissionRecord] | None = None,
) -> tuple[CriticalPath, float]:
    """Play one episode; returns its critical path and total reward.

    Executing the selected action replays the stored child edge, so only
    planning consumes simulator interactions. When global_budget is given the
    per-step planning budget shrinks to the remaining global allowance and
    the episode truncates once it reaches zero.
    """
    env = agent.env
    cap = agent.cfg.episode_cap if episode_cap is None else episode_cap
    state = env.initial_state()
    obs = env.observe(state)
    tree = LookaheadTree.initialise(state, obs, agent.plan_cfg.horizon, env.is_terminal(state))
    table = NoveltyTable(agent.plan_cfg.novelty)
    policy = agent.base_policy()
    vt, vt_batch = agent.termination_cost()

    records: list[TransitionRecord] = []
    total = 0.0
    terminal = env.is_terminal(state)
    while not terminal and len(records) < cap:
        limit = agent.plan_cfg.budget
        if global_budget is not None:
            limit = min(limit, global_budget - sim.total_used)
            if limit <= 0:
                break
        if agent.cfg.novelty_reset_per_step and records:
            table.reset()
        riw_plan(
            tree, sim, policy, agent.plan_cfg, table, agent.extractor, rng,
            admission_log=admission_log, budget_limit=limit,
        )
        action = select_root_action(tree, vt, rng, vt_batch)
        child = tree.root.children[action]
        records.append(TransitionRecord(obs, action, child.reward_in, child.obs, child.terminal))
        total += child.reward_in
        tree.advance_root(action)
        obs, terminal = child.obs, child.terminal
    return CriticalPath(tuple(records)), total


def evaluate(
    agent: PlanningAgent,
    n_episodes: int,
    seed: int,
    episode_cap: int | None = None,
    sim: BudgetedSimulator | None = None,
) -> list[float]:
    """Episode returns under frozen parameters, one rng stream per episode."""
    if sim is None:
        sim = BudgetedSimulator(agent.env)
    streams = np.random.SeedSequence([seed, 0xE7A1]).spawn(n_episodes)
    returns = []
    for ss in streams:
        _, ret = run_episode(agent, sim, np.random.default_rng(ss), episode_cap)
        returns.append(ret)
    return returns


def run_training(
    variant: AgentVariant,
    env: Environment,
    cfg: TrainRunConfig,
    seed: int = 0,
    checkpoint_cb: Callable[[int, ParameterSet], None] | None = None,
) -> tuple[PlanningAgent, list[IntervalLogRow], BudgetedSimulator]:
    """Interval-based training with the t-test acceptance schedule.

    Interval i runs under the pending candidate when one exists, otherwise
    under the incumbent. The candidate is accepted unless episodes under the
    incumbent's reference sample test better (p < 0.1); every interval then
    trains the next candidate from its own critical-path transitions.
    """
    if not variant.learns:
        raise ValueError(f"variant {variant.value} has no learning components")
    agent = PlanningAgent(variant, env, cfg, seed)
    sim = BudgetedSimulator(env)
    root_ss = np.random.SeedSequence([seed, 0x7C31])
    episode_rng = np.random.default_rng(root_ss.spawn(1)[0])
    fit_seed_stream = root_ss.spawn(1)[0]

    incumbent = agent.params
    assert incumbent is not None
    pending: ParameterSet | None = None
    reference_rewards: list[float] | None = None
    value_target = incumbent.value.clone()
    decision_steps = 0
    steps_at_refresh = 0
    log: list[IntervalLogRow] = []
    interval = 0

    while sim.total_used < cfg.total_budget:
        active = pending if pending is not None else incumbent
        agent.params = active
        start_used = sim.total_used
        transitions: list[CriticalPath] = []
        rewards: list[float] = []
        while (
            sim.total_used - start_used < cfg.interval_budget
            and sim.total_used < cfg.total_budget
        ):
            path, ret = run_episode(agent, sim, episode_rng, global_budget=cfg.total_budget)
            if len(path) == 0:
                break  # no budget left to act at all
            transitions.append(path)
            rewards.append(ret)
            decision_steps += len(path)

        if not rewards:
            break

        if pending is not None and reference_rewards is not None:
            accepted, p = schedule_decision(reference_rewards, rewards)
            if accepted:
                incumbent = pending
                reference_rewards = rewards
            pending = None
        else:
            accepted, p = True, None
            reference_rewards = rewards

        log.append(
            IntervalLogRow(
                interval=interval,
                sim_used=sim.total_used - start_used,
                episodes=len(rewards),
                mean_return=sum(rewards) / len(rewards),
                p_value=p,
                accepted=accepted,
            )
        )
        if accepted and checkpoint_cb is not None:
            checkpoint_cb(interval, incumbent)

        if decision_steps - steps_at_refresh >= cfg.target_refresh_steps:
            value_target = incumbent.value.clone()
            steps_at_refresh = decision_steps

        # Train the next candidate from this interval's critical paths.
        if sim.total_used < cfg.total_budget:
            s1, s2 = (int(s.generate_state(1)[0]) for s in fit_seed_stream.spawn(2))
            try:
                pol_batch = build_policy_batch(transitions, env.n_actions)
                val_batch = build_value_batch(
                    transitions, value_target, cfg.gamma, cfg.reward_clip
                )
                pending = ParameterSet(
                    policy=fit_policy(
                        incumbent.policy, pol_batch, replace(cfg.policy_fit, seed=s1)
                    ),
                    value=fit_value(
                        incumbent.value, val_batch, replace(cfg.value_fit, seed=s2)
                    ),
                )
            except NonFiniteLoss:
                pending = None  # candidate unusable, treated as rejected
        interval += 1

    agent.params = incumbent
    return agent, log, sim
