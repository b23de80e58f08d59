"""Lookahead tree: node storage, caching across time steps, value backup,
solved-label propagation, and root advance.

The tree is deterministic: at most one child per action. Backup is the
undiscounted recursion of the action-selection rule -- leaves take a
termination cost (zero when terminal), interior nodes take the best child's
edge reward plus value, and root Q-values are read off the root's children.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from .errors import DepthOverflow, MissingChild, NoChildren
from .mdp import ActionId, Observation, StateToken

TerminationCost = Callable[[Observation], float]
# Optional vectorized form: list of observations -> array of costs.
BatchTerminationCost = Callable[[Sequence[Observation]], np.ndarray]


@dataclass(eq=False)
class Node:
    """One lookahead node. Identity-hashed; depth is actions from the root."""

    state: StateToken
    obs: Observation
    depth: int
    reward_in: float
    terminal: bool
    solved: bool = False
    cached: bool = False
    novel: bool = True
    tested: bool = False  # admission-time novelty verdict recorded yet?
    parent: "Node | None" = field(default=None, repr=False)
    action_in: ActionId | None = None
    children: dict[ActionId, "Node"] = field(default_factory=dict)
    features: tuple[int, ...] | None = field(default=None, repr=False)
    policy_cache: np.ndarray | None = field(default=None, repr=False)
    cost_cache: float | None = field(default=None, repr=False)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class BackupResult:
    """Values per node plus Q per root action."""

    v: dict[Node, float]
    q: dict[ActionId, float]


class LookaheadTree:
    def __init__(self, root: Node, horizon: int):
        self.root = root
        self.horizon = horizon
        self.node_count = 1

    @classmethod
    def initialise(cls, state: StateToken, obs: Observation, horizon: int,
                   terminal: bool = False) -> "LookaheadTree":
        root = Node(state=state, obs=obs, depth=0, reward_in=0.0, terminal=terminal)
        return cls(root, horizon)

    def iter_nodes(self) -> Iterator[Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(node.children[a] for a in sorted(node.children, reverse=True))

    def update_lookahead(
        self,
        parent: Node,
        action: ActionId,
        child_state: StateToken,
        reward: float,
        terminal: bool,
        obs: Observation,
    ) -> Node:
        """Admit a transition; revisits of an existing edge return the stored child."""
        existing = parent.children.get(action)
        if existing is not None:
            return existing
        if parent.depth + 1 > self.horizon:
            raise DepthOverflow(
                f"admission at depth {parent.depth + 1} exceeds horizon {self.horizon}"
            )
        child = Node(
            state=child_state,
            obs=obs,
            depth=parent.depth + 1,
            reward_in=reward,
            terminal=terminal,
            parent=parent,
            action_in=action,
        )
        parent.children[action] = child
        self.node_count += 1
        return child

    def advance_root(self, action: ActionId) -> Node:
        """Re-root at the selected action's child; siblings are discarded.

        The retained subtree is rebased to root depth 0 and every node is
        marked cached: cached nodes are exempt from novelty tests and their
        edges replay without simulator calls.
        """
        child = self.root.children.get(action)
        if child is None:
            raise MissingChild(f"no child under action {action} at the root")
        child.parent = None
        child.action_in = None
        self.root = child
        count = 0
        stack = [(child, 0)]
        while stack:
            node, depth = stack.pop()
            node.depth = depth
            node.cached = True
            count += 1
            stack.extend((c, depth + 1) for c in node.children.values())
        self.node_count = count
        return child

    def has_solved_label(self) -> bool:
        return self.root.solved

    def dump(self) -> str:
        """One node per line: action path, depth, edge reward, flags."""
        lines = []

        def walk(node: Node, path: str) -> None:
            flags = "".join(
                ch
                for ch, on in (
                    ("T", node.terminal),
                    ("S", node.solved),
                    ("C", node.cached),
                    ("n", not node.novel),
                )
                if on
            )
            lines.append(f"{path or '.'} depth={node.depth} r={node.reward_in!r} [{flags}]")
            for a in sorted(node.children):
                walk(node.children[a], f"{path}.{a}" if path else str(a))

        walk(self.root, "")
        return "\n".join(lines)


def backup(
    tree: LookaheadTree,
    termination_cost: TerminationCost,
    batch_termination_cost: BatchTerminationCost | None = None,
) -> BackupResult:
    """Compute V for every node and Q for the root's actions.

    Leaves: V = 0 when terminal, else the termination cost of their
    observation. Interior: V = max over children of (edge reward + child V);
    the deterministic transition collapses the successor expectation.
    A batched cost function, when given, evaluates all non-terminal leaves in
    one call. Leaf costs are memoized on the node: parameters are frozen for
    a tree's lifetime, so a leaf's cost never changes while it stays a leaf.
    """
    order: list[Node] = list(tree.iter_nodes())
    v: dict[Node, float] = {}

    if batch_termination_cost is not None:
        fresh = [n for n in order if n.is_leaf and not n.terminal and n.cost_cache is None]
        if fresh:
            costs = batch_termination_cost([n.obs for n in fresh])
            for n, c in zip(fresh, costs):
                n.cost_cache = float(c)

    for node in reversed(order):  # children precede parents
        if node.is_leaf:
            if node.terminal:
                v[node] = 0.0
            else:
                if node.cost_cache is None:
                    node.cost_cache = float(termination_cost(node.obs))
                v[node] = node.cost_cache
        else:
            v[node] = max(c.reward_in + v[c] for c in node.children.values())

    q = {a: c.reward_in + v[c] for a, c in tree.root.children.items()}
    return BackupResult(v=v, q=q)


def select_root_action(
    tree: LookaheadTree,
    termination_cost: TerminationCost,
    rng: np.random.Generator,
    batch_termination_cost: BatchTerminationCost | None = None,
) -> ActionId:
    """Argmax of root Q; exact ties break uniformly with the supplied rng.

    Actions without a child carry no reward sample and are never selected.
    """
    if not tree.root.children:
        raise NoChildren("root has no expanded children to select among")
    result = backup(tree, termination_cost, batch_termination_cost)
    best = max(result.q.values())
    candidates = sorted(a for a, qv in result.q.items() if qv == best)
    if len(candidates) == 1:
        return candidates[0]
    return candidates[int(rng.integers(len(candidates)))]


def update_solved_labels(node: Node, applicable_actions: Callable[[Node], Iterable[ActionId]]) -> None:
    """Mark a rollout endpoint solved and back-propagate toward the root.

    A parent becomes solved when every applicable action has a solved child;
    propagation stops at the first parent that does not.
    """
    node.solved = True
    parent = node.parent
    while parent is not None and not parent.solved:
        children = parent.children
        for a in applicable_actions(parent):
            c = children.get(a)
            if c is None or not c.solved:
                return
        parent.solved = True
        parent = parent.parent
