"""Shared synthetic environments and helpers for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from widthplan.mdp import Environment, Observation


def state_observation(state_id: int, width: int = 4, palette: int = 4) -> Observation:
    """Encode a state id as a one-row pixel grid (base-`palette` digits)."""
    digits = []
    v = state_id
    for _ in range(width):
        digits.append(v % palette)
        v //= palette
    return Observation(width, 1, palette, tuple(digits))


class RandomGraphEnv(Environment):
    """Seeded random deterministic MDP over a bounded state space.

    Transition table, rewards (small integers), and terminal flags are fixed
    at construction, so the environment is a pure function of (state, action).
    """

    def __init__(self, n_states: int = 12, n_actions: int = 3, seed: int = 0,
                 terminal_frac: float = 0.15, obs_width: int = 4):
        rng = np.random.default_rng(seed)
        self.n_states = n_states
        self._n_actions = n_actions
        self.obs_width = obs_width
        self.palette = 4
        assert n_states <= self.palette**obs_width
        self.next_state = rng.integers(0, n_states, size=(n_states, n_actions))
        self.rewards = rng.integers(-2, 5, size=(n_states, n_actions)).astype(float)
        self.terminal = rng.random(n_states) < terminal_frac
        self.terminal[0] = False
        self.name = f"random-graph-{seed}"

    @property
    def n_actions(self) -> int:
        return self._n_actions

    def initial_state(self):
        return (0, False)

    def is_terminal(self, state) -> bool:
        return state[1]

    def transition(self, state, action):
        sid, done = state
        if done:
            return state, 0.0, True
        nxt = int(self.next_state[sid, action])
        term = bool(self.terminal[nxt])
        return (nxt, term), float(self.rewards[sid, action]), term

    def observe(self, state) -> Observation:
        return state_observation(state[0], self.obs_width, self.palette)


class FanTerminalEnv(Environment):
    """Every action from the single start state leads to a distinct terminal."""

    def __init__(self, n_actions: int = 3, rewards: tuple[float, ...] | None = None):
        self._n_actions = n_actions
        self.rewards = rewards if rewards is not None else tuple(float(i) for i in range(n_actions))
        self.name = "fan-terminal"

    @property
    def n_actions(self) -> int:
        return self._n_actions

    def initial_state(self):
        return ("start",)

    def is_terminal(self, state) -> bool:
        return state[0] != "start"

    def transition(self, state, action):
        if state[0] != "start":
            return state, 0.0, True
        return (f"end-{action}",), self.rewards[action], True

    def observe(self, state) -> Observation:
        if state[0] == "start":
            return state_observation(0, 2, max(self._n_actions + 1, 2))
        return state_observation(
            int(state[0].split("-")[1]) + 1, 2, max(self._n_actions + 1, 2)
        )


class LoopEnv(Environment):
    """One non-terminal state; every action self-loops with zero reward."""

    def __init__(self, n_actions: int = 2):
        self._n_actions = n_actions
        self.name = "loop"

    @property
    def n_actions(self) -> int:
        return self._n_actions

    def initial_state(self):
        return 0

    def is_terminal(self, state) -> bool:
        return False

    def transition(self, state, action):
        return 0, 0.0, False

    def observe(self, state) -> Observation:
        return state_observation(0, 2, 2)


class FirstRewardEnv(Environment):
    """Action 0 pays +1 immediately from the start; everything else is flat."""

    def __init__(self, n_actions: int = 3):
        self._n_actions = n_actions
        self.name = "first-reward"

    @property
    def n_actions(self) -> int:
        return self._n_actions

    def initial_state(self):
        return 0

    def is_terminal(self, state) -> bool:
        return False

    def transition(self, state, action):
        if state == 0 and action == 0:
            return 1, 1.0, False
        return 1, 0.0, False

    def observe(self, state) -> Observation:
        return state_observation(state, 2, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
