"""Deterministic black-box simulator contract and interaction accounting.

Environments are pure transition functions over immutable state tokens:
``transition(state, action)`` always returns the same ``(next_state, reward,
terminal)`` triple, which makes saved tokens trivially restorable and lets the
lookahead replay cached edges without touching the simulator. Terminal states
are absorbing and reward-free.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import BudgetExhausted, InvalidAction

# Opaque handle for a saved simulator state. Tokens are immutable values and
# safe to move between workers.
StateToken = Hashable

ActionId = int


@dataclass(frozen=True)
class Observation:
    """A width x height grid of color indices, row-major.

    This is the only state information visible to feature extractors and
    learners; the underlying simulator state may carry more.
    """

    width: int
    height: int
    palette_size: int
    pixels: tuple[int, ...]

    def __post_init__(self):
        if len(self.pixels) != self.width * self.height:
            raise ValueError(
                f"pixel count {len(self.pixels)} != {self.width}x{self.height}"
            )

    def validate(self) -> None:
        """Check every pixel value against the palette. O(width*height)."""
        for v in self.pixels:
            if not 0 <= v < self.palette_size:
                raise ValueError(f"pixel value {v} outside palette [0, {self.palette_size})")

    def color_at(self, x: int, y: int) -> int:
        return self.pixels[y * self.width + x]

    def to_array(self) -> np.ndarray:
        return np.asarray(self.pixels, dtype=np.int64).reshape(self.height, self.width)

    def to_onehot(self) -> np.ndarray:
        """Flat one-hot-per-pixel encoding (width*height*palette floats)."""
        flat = np.zeros(self.width * self.height * self.palette_size)
        idx = np.arange(len(self.pixels)) * self.palette_size + np.asarray(self.pixels)
        flat[idx] = 1.0
        return flat

    @property
    def onehot_size(self) -> int:
        return self.width * self.height * self.palette_size


@dataclass(frozen=True)
class TransitionRecord:
    """One executed step: the unit of the critical-path training set."""

    obs: Observation
    action: ActionId
    reward: float
    next_obs: Observation
    terminal: bool


@dataclass(frozen=True)
class CriticalPath:
    """The transitions actually executed at the root over one episode."""

    steps: tuple[TransitionRecord, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def total_reward(self) -> float:
        return sum(t.reward for t in self.steps)

    def is_chained(self) -> bool:
        """Consecutive records must share their boundary observation."""
        return all(
            a.next_obs == b.obs for a, b in zip(self.steps, self.steps[1:])
        )


@dataclass(frozen=True)
class StepOutcome:
    state: StateToken
    reward: float
    terminal: bool
    obs: Observation


class Environment(ABC):
    """Deterministic simulator over immutable state tokens."""

    name: str = "env"

    @property
    @abstractmethod
    def n_actions(self) -> int: ...

    @abstractmethod
    def initial_state(self) -> StateToken: ...

    @abstractmethod
    def observe(self, state: StateToken) -> Observation: ...

    @abstractmethod
    def is_terminal(self, state: StateToken) -> bool: ...

    @abstractmethod
    def transition(self, state: StateToken, action: ActionId) -> tuple[StateToken, float, bool]:
        """Pure: same (state, action) always yields the same triple."""

    def applicable_actions(self, state: StateToken) -> range:
        # Minimal-action-set convention: constant per environment. Terminal
        # states keep the full set; their transitions are absorbing no-ops.
        return range(self.n_actions)

    def step(self, state: StateToken, action: ActionId) -> StepOutcome:
        if not 0 <= action < self.n_actions:
            raise InvalidAction(f"action {action} outside [0, {self.n_actions})")
        nxt, reward, terminal = self.transition(state, action)
        return StepOutcome(nxt, reward, terminal, self.observe(nxt))


@dataclass
class SimulatorBudget:
    """Ledger of fresh simulator interactions for one planning call."""

    limit: int
    used: int = 0

    @property
    def remaining(self) -> int:
        return self.limit - self.used

    @property
    def exhausted(self) -> bool:
        return self.used >= self.limit

    def charge(self) -> None:
        if self.used >= self.limit:
            raise BudgetExhausted(f"budget of {self.limit} interactions spent")
        self.used += 1


class BudgetedSimulator:
    """Charges one budget unit per fresh transition.

    Cached replays never go through this wrapper, so they are free: the
    lookahead reads stored child nodes instead of recalling the simulator.
    ``total_used`` accumulates across planning calls for global accounting.
    """

    def __init__(self, env: Environment):
        self.env = env
        self.total_used = 0
        self.budget: SimulatorBudget | None = None

    def set_budget(self, limit: int) -> SimulatorBudget:
        self.budget = SimulatorBudget(limit)
        return self.budget

    def step(self, state: StateToken, action: ActionId) -> StepOutcome:
        if self.budget is not None:
            self.budget.charge()
        self.total_used += 1
        return self.env.step(state, action)

    @property
    def n_actions(self) -> int:
        return self.env.n_actions

    def applicable_actions(self, state: StateToken) -> range:
        return self.env.applicable_actions(state)


class EpisodeSimulator:
    """Stateful cursor over an environment with save/restore semantics."""

    def __init__(self, env: Environment):
        self.env = env
        self.state = env.initial_state()

    def save_state(self) -> StateToken:
        return self.state

    def restore_state(self, token: StateToken) -> None:
        self.state = token

    def observe(self) -> Observation:
        return self.env.observe(self.state)

    def step(self, action: ActionId) -> StepOutcome:
        out = self.env.step(self.state, action)
        self.state = out.state
        return out


def trace(env: Environment, state: StateToken, actions: Iterable[ActionId]) -> list[StepOutcome]:
    """Replay an action sequence from a token; test oracle for restore fidelity."""
    out = []
    for a in actions:
        res = env.step(state, a)
        out.append(res)
        state = res.state
    return out


def replay_return(env: Environment, actions: Sequence[ActionId]) -> float:
    """Total reward of replaying actions from the initial state."""
    return sum(o.reward for o in trace(env, env.initial_state(), actions))
