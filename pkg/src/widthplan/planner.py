"""Rollout construction of the novelty-pruned lookahead.

riw_plan repeats depth-first rollouts from the root while the root is
unsolved and fresh-interaction budget remains. A rollout descends while the
current node is novel, non-terminal, and below the horizon, sampling actions
from the base policy restricted to unsolved children; every rollout endpoint
gets a solved label that back-propagates. Fresh transitions cost one budget
unit; replays of edges already in the tree are free.

Solved labels are per planning call: they are reset (to the terminal flag) at
the start of each call, since a label certifies exhaustion only relative to
the novelty context that produced it. Nodes cached from previous time steps
are never novelty-tested and never update the tables, so they cannot be
pruned. iw1_plan is the breadth-first width-1 search used as a test oracle.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AllChildrenSolved, BudgetExhausted, ConfigError
from .features import FeatureExtractor, FeatureSet
from .lookahead import LookaheadTree, Node, update_solved_labels
from .mdp import ActionId, BudgetedSimulator, Environment, Observation, StateToken
from .novelty import ClassicTable, NoveltyMode, NoveltyTable

# Maps an observation to a probability distribution over the full action set.
BasePolicy = Callable[[Observation], np.ndarray]


@dataclass(frozen=True)
class PlanConfig:
    budget: int = 100
    horizon: int = 100
    novelty: NoveltyMode = NoveltyMode.CLASSIC

    def __post_init__(self):
        if self.budget < 1:
            raise ConfigError("plan budget must be >= 1")
        if self.horizon < 1:
            raise ConfigError("lookahead horizon must be >= 1")


@dataclass(frozen=True)
class AdmissionRecord:
    """Replayable log entry for one fresh admission (novelty audit trail)."""

    depth: int
    features: FeatureSet
    novel: bool
    rollout: int = 0


def random_base_policy(n_actions: int) -> BasePolicy:
    probs = np.full(n_actions, 1.0 / n_actions)

    def policy(obs: Observation) -> np.ndarray:
        return probs

    return policy


def sample_unsolved_child(
    node: Node,
    base_policy: BasePolicy,
    rng: np.random.Generator,
    sim: BudgetedSimulator,
    tree: LookaheadTree,
) -> tuple[ActionId, Node]:
    """Sample an action among those whose child is absent or unsolved.

    The base policy is renormalized over the candidate actions. An existing
    child is replayed without a simulator call; a fresh transition is
    simulated (charging budget) and admitted to the tree.
    """
    candidates = []
    for a in sim.applicable_actions(node.state):
        c = node.children.get(a)
        if c is None or not c.solved:
            candidates.append(a)
    if not candidates:
        raise AllChildrenSolved(f"node at depth {node.depth} has only solved children")

    if len(candidates) == 1:
        action = candidates[0]
    else:
        if node.policy_cache is None:
            node.policy_cache = np.asarray(base_policy(node.obs), dtype=float)
        probs = node.policy_cache[candidates]
        total = probs.sum()
        if total <= 0.0:
            probs = np.full(len(candidates), 1.0 / len(candidates))
        else:
            probs = probs / total
        action = candidates[int(rng.choice(len(candidates), p=probs))]

    child = node.children.get(action)
    if child is not None:
        return action, child
    out = sim.step(node.state, action)  # may raise BudgetExhausted
    child = tree.update_lookahead(node, action, out.state, out.reward, out.terminal, out.obs)
    return action, child


def _still_novel(node: Node, table: NoveltyTable, extractor: FeatureExtractor) -> bool:
    """Loop-guard novelty for a node the rollout is standing on."""
    if node.cached or node.parent is None:
        # Cached nodes are exempt from pruning; the root is admitted
        # unconditionally.
        return True
    if not node.novel:
        return False
    if node.features is None:
        node.features = extractor.features(node.obs, node.parent.obs)
    return table.is_novel_revisit(node.features, node.depth)


def riw_plan(
    tree: LookaheadTree,
    sim: BudgetedSimulator,
    base_policy: BasePolicy,
    cfg: PlanConfig,
    table: NoveltyTable,
    extractor: FeatureExtractor,
    rng: np.random.Generator,
    admission_log: list[AdmissionRecord] | None = None,
    budget_limit: int | None = None,
) -> LookaheadTree:
    """Enrich the tree with novelty-pruned rollouts under the budget.

    Budget exhaustion is a normal stop; the interrupted rollout's last node is
    not a genuine endpoint and gets no solved label.
    """
    sim.set_budget(cfg.budget if budget_limit is None else budget_limit)

    def applicable(n: Node):
        return sim.applicable_actions(n.state)

    for node in tree.iter_nodes():
        node.solved = node.terminal

    rollout = 0
    if admission_log:
        rollout = admission_log[-1].rollout + 1

    root = tree.root
    if not root.tested:
        root.features = extractor.features(root.obs, None)
        root.novel = True
        root.tested = True
        table.update(root.features, 0)
        if admission_log is not None:
            admission_log.append(AdmissionRecord(0, root.features, True, rollout))

    while not root.solved:
        node = root
        while True:
            if (
                node.terminal
                or node.depth >= cfg.horizon
                or not _still_novel(node, table, extractor)
            ):
                break
            try:
                _, child = sample_unsolved_child(node, base_policy, rng, sim, tree)
            except AllChildrenSolved:
                break
            except BudgetExhausted:
                return tree
            if not child.tested:
                child.features = extractor.features(child.obs, node.obs)
                child.novel = table.is_novel(child.features, child.depth)
                child.tested = True
                table.update(child.features, child.depth)
                if admission_log is not None:
                    admission_log.append(
                        AdmissionRecord(child.depth, child.features, child.novel, rollout)
                    )
            node = child
        update_solved_labels(node, applicable)
        rollout += 1
    return tree


def iw1_plan(
    env: Environment,
    root_state: StateToken,
    cfg: PlanConfig,
    extractor: FeatureExtractor,
    budget: int | None = None,
) -> set[Observation]:
    """Breadth-first width-1 search; admits only classic-novel states.

    Returns the set of admitted observations. Admission count is bounded by
    the feature universe size: every admission marks at least one feature
    seen for the first time.
    """
    table = ClassicTable()
    admitted: set[Observation] = set()
    calls = 0

    root_obs = env.observe(root_state)
    fs = extractor.features(root_obs, None)
    if not table.is_novel(fs):
        return admitted
    table.update(fs)
    admitted.add(root_obs)

    queue: deque[tuple[StateToken, Observation, int]] = deque()
    if not env.is_terminal(root_state):
        queue.append((root_state, root_obs, 0))
    while queue:
        state, obs, depth = queue.popleft()
        if depth >= cfg.horizon:
            continue
        for a in env.applicable_actions(state):
            if budget is not None and calls >= budget:
                return admitted
            out = env.step(state, a)
            calls += 1
            child_fs = extractor.features(out.obs, obs)
            if table.is_novel(child_fs):
                table.update(child_fs)
                admitted.add(out.obs)
                if not out.terminal:
                    queue.append((out.state, out.obs, depth + 1))
    return admitted


def replay_admission_log(
    log: list[AdmissionRecord], mode: NoveltyMode
) -> list[bool]:
    """Recompute each admission verdict from a fresh table; audit helper.

    Returns, per record, whether the logged verdict matches the replayed one.
    """
    table = NoveltyTable(mode)
    ok = []
    for i, rec in enumerate(log):
        if i == 0 and rec.depth == 0:
            verdict = True  # root admission is unconditional
        else:
            verdict = table.is_novel(rec.features, rec.depth)
        ok.append(verdict == rec.novel)
        table.update(rec.features, rec.depth)
    return ok
