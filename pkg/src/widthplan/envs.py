"""Desk-scale deterministic pixel environments and their registry.

Each environment is a pure transition function over small immutable state
tuples and emits a small color-indexed pixel grid directly (no frame
down-sampling exists at this scale). Terminal states are absorbing and
reward-free. Reward structures cover the benchmark axes: dense shaping,
sparse goal, delayed penalty, key-door, and a high-branching-factor chain.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .errors import UnknownEnv
from .mdp import ActionId, Environment, Observation, StateToken


@dataclass(frozen=True)
class EnvSpec:
    name: str
    width: int
    height: int
    palette_size: int
    n_actions: int
    reward_structure: str
    max_steps: int | None = None


class GridNav(Environment):
    """Four-direction navigation on a clamped grid.

    sparse-goal: +goal_reward on the transition entering the goal, terminal,
    zero elsewhere. dense: additionally shaped by the change in Manhattan
    distance to the goal (+1 per closing step, -1 per opening step).
    """

    UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
    _DELTAS = {UP: (0, -1), DOWN: (0, 1), LEFT: (-1, 0), RIGHT: (1, 0)}

    COLOR_BG, COLOR_AGENT, COLOR_GOAL = 0, 1, 2

    def __init__(
        self,
        width: int = 10,
        height: int = 10,
        reward: str = "sparse-goal",
        goal_reward: float = 100.0,
        start: tuple[int, int] | None = None,
        goal: tuple[int, int] | None = None,
    ):
        if reward not in ("sparse-goal", "dense"):
            raise ValueError(f"unknown GridNav reward structure {reward!r}")
        self.width = width
        self.height = height
        self.reward = reward
        self.goal_reward = goal_reward
        self.start = start if start is not None else (0, 0)
        self.goal = goal if goal is not None else (width - 1, height - 1)
        self.name = "gridnav-dense" if reward == "dense" else "gridnav-sparse"

    @property
    def n_actions(self) -> int:
        return 4

    @property
    def spec(self) -> EnvSpec:
        return EnvSpec(self.name, self.width, self.height, 3, 4, self.reward)

    def initial_state(self) -> StateToken:
        return (*self.start, False)

    def is_terminal(self, state: StateToken) -> bool:
        return state[2]

    def _distance(self, x: int, y: int) -> int:
        return abs(x - self.goal[0]) + abs(y - self.goal[1])

    def transition(self, state: StateToken, action: ActionId):
        x, y, done = state
        if done:
            return state, 0.0, True
        dx, dy = self._DELTAS[action]
        nx = min(max(x + dx, 0), self.width - 1)
        ny = min(max(y + dy, 0), self.height - 1)
        terminal = (nx, ny) == self.goal
        reward = self.goal_reward if terminal else 0.0
        if self.reward == "dense":
            reward += float(self._distance(x, y) - self._distance(nx, ny))
        return (nx, ny, terminal), reward, terminal

    def observe(self, state: StateToken) -> Observation:
        x, y, _ = state
        pixels = [self.COLOR_BG] * (self.width * self.height)
        gx, gy = self.goal
        pixels[gy * self.width + gx] = self.COLOR_GOAL
        pixels[y * self.width + x] = self.COLOR_AGENT  # agent drawn over the goal
        return Observation(self.width, self.height, 3, tuple(pixels))


class KeyDoorNav(Environment):
    """GridNav variant: the door pays out only once the key has been picked up."""

    COLOR_BG, COLOR_AGENT, COLOR_DOOR, COLOR_KEY = 0, 1, 2, 3

    def __init__(
        self,
        width: int = 8,
        height: int = 8,
        goal_reward: float = 100.0,
        start: tuple[int, int] = (0, 0),
        key: tuple[int, int] | None = None,
        door: tuple[int, int] | None = None,
    ):
        self.width = width
        self.height = height
        self.goal_reward = goal_reward
        self.start = start
        self.key = key if key is not None else (width - 1, 0)
        self.door = door if door is not None else (width - 1, height - 1)
        self.name = "gridnav-keydoor"

    @property
    def n_actions(self) -> int:
        return 4

    @property
    def spec(self) -> EnvSpec:
        return EnvSpec(self.name, self.width, self.height, 4, 4, "key-door")

    def initial_state(self) -> StateToken:
        return (*self.start, False, False)

    def is_terminal(self, state: StateToken) -> bool:
        return state[3]

    def transition(self, state: StateToken, action: ActionId):
        x, y, has_key, done = state
        if done:
            return state, 0.0, True
        dx, dy = GridNav._DELTAS[action]
        nx = min(max(x + dx, 0), self.width - 1)
        ny = min(max(y + dy, 0), self.height - 1)
        picked = has_key or (nx, ny) == self.key
        terminal = picked and (nx, ny) == self.door
        reward = self.goal_reward if terminal else 0.0
        return (nx, ny, picked, terminal), reward, terminal

    def observe(self, state: StateToken) -> Observation:
        x, y, has_key, _ = state
        pixels = [self.COLOR_BG] * (self.width * self.height)
        dx, dy = self.door
        pixels[dy * self.width + dx] = self.COLOR_DOOR
        if not has_key:
            kx, ky = self.key
            pixels[ky * self.width + kx] = self.COLOR_KEY
        pixels[y * self.width + x] = self.COLOR_AGENT
        return Observation(self.width, self.height, 4, tuple(pixels))


class Corridor(Environment):
    """Delayed-penalty lane corridor: the slalom analogue.

    The agent advances one column per step and only chooses its lane. Every
    step costs -1. Gates sit every gate_every columns; each gate crossed in
    the wrong lane counts as missed. The whole miss penalty is assessed only
    on arrival at the end of the corridor, so within any shorter horizon all
    returns are identical. With immediate_penalty=True each miss costs its
    penalty at the crossing step instead (same totals, informative early).
    """

    LANE_UP, LANE_DOWN = 0, 1
    COLOR_BG, COLOR_AGENT, COLOR_PROGRESS, COLOR_GATE = 0, 1, 2, 3

    def __init__(
        self,
        length: int = 70,
        lanes: int = 5,
        gate_every: int = 10,
        miss_penalty: float = 50.0,
        step_reward: float = -1.0,
        immediate_penalty: bool = False,
        start_lane: int = 2,
        obs_width: int = 10,
        obs_height: int = 10,
    ):
        if lanes + 2 > obs_height:
            raise ValueError("observation too short for the lane count")
        self.length = length
        self.lanes = lanes
        self.gate_every = gate_every
        self.miss_penalty = miss_penalty
        self.step_reward = step_reward
        self.immediate_penalty = immediate_penalty
        self.start_lane = start_lane
        self.obs_width = obs_width
        self.obs_height = obs_height
        self.name = "corridor-70-signal" if immediate_penalty else "corridor-70"

    @property
    def n_actions(self) -> int:
        return 2

    @property
    def spec(self) -> EnvSpec:
        structure = "dense" if self.immediate_penalty else "delayed-penalty"
        return EnvSpec(
            self.name, self.obs_width, self.obs_height, 4, 2, structure, self.length
        )

    def gate_lane(self, gate_index: int) -> int:
        return (3 * gate_index) % self.lanes

    def initial_state(self) -> StateToken:
        return (self.start_lane, 0, 0, False)

    def is_terminal(self, state: StateToken) -> bool:
        return state[3]

    def transition(self, state: StateToken, action: ActionId):
        lane, step, missed, done = state
        if done:
            return state, 0.0, True
        if action == self.LANE_UP:
            lane = max(lane - 1, 0)
        else:
            lane = min(lane + 1, self.lanes - 1)
        step += 1
        reward = self.step_reward
        if step % self.gate_every == 0 and step <= self.length:
            if lane != self.gate_lane(step // self.gate_every):
                missed += 1
                if self.immediate_penalty:
                    reward -= self.miss_penalty
        terminal = step >= self.length
        if terminal and not self.immediate_penalty:
            reward -= self.miss_penalty * missed
        return (lane, step, missed, terminal), reward, terminal

    def observe(self, state: StateToken) -> Observation:
        lane, step, _, _ = state
        w, h = self.obs_width, self.obs_height
        pixels = [self.COLOR_BG] * (w * h)
        next_gate = min((step // self.gate_every) + 1, self.length // self.gate_every)
        pixels[(self.lanes) * w + self.gate_lane(next_gate)] = self.COLOR_GATE
        progress = min(step * w // (self.length + 1), w - 1)
        pixels[(h - 1) * w + progress] = self.COLOR_PROGRESS
        pixels[lane * w + step % w] = self.COLOR_AGENT
        return Observation(w, h, 4, tuple(pixels))


class BranchChain(Environment):
    """High-branching chain: one correct action per depth, the rest dead ends.

    Picking the depth's correct action advances; anything else is an
    immediate zero-reward terminal. Reaching the final depth pays out.
    """

    COLOR_BG, COLOR_PROGRESS, COLOR_DEAD = 0, 1, 2

    def __init__(self, k: int = 18, depth: int = 12, final_reward: float = 100.0):
        self.k = k
        self.depth = depth
        self.final_reward = final_reward
        self.name = f"branch-{k}"

    @property
    def n_actions(self) -> int:
        return self.k

    @property
    def spec(self) -> EnvSpec:
        return EnvSpec(self.name, self.depth, 2, 3, self.k, "sparse-goal", self.depth)

    def correct_action(self, d: int) -> ActionId:
        return (7 * d + 3) % self.k

    def initial_state(self) -> StateToken:
        return (0, False, False)

    def is_terminal(self, state: StateToken) -> bool:
        return state[2]

    def transition(self, state: StateToken, action: ActionId):
        d, dead, done = state
        if done:
            return state, 0.0, True
        if action != self.correct_action(d):
            return (d, True, True), 0.0, True
        d += 1
        if d >= self.depth:
            return (d, False, True), self.final_reward, True
        return (d, False, False), 0.0, False

    def observe(self, state: StateToken) -> Observation:
        d, dead, _ = state
        w = self.depth
        pixels = [self.COLOR_BG] * (w * 2)
        for x in range(min(d, w)):
            pixels[x] = self.COLOR_PROGRESS
        if dead:
            pixels[w] = self.COLOR_DEAD
        return Observation(w, 2, 3, tuple(pixels))


# -- registry ---------------------------------------------------------------

EnvBuilder = Callable[..., Environment]

_REGISTRY: dict[str, EnvBuilder] = {}


def register_env(name: str):
    def deco(builder: EnvBuilder) -> EnvBuilder:
        _REGISTRY[name] = builder
        return builder

    return deco


register_env("gridnav-sparse")(lambda **kw: GridNav(reward="sparse-goal", **kw))
register_env("gridnav-dense")(lambda **kw: GridNav(reward="dense", **kw))
register_env("gridnav-keydoor")(lambda **kw: KeyDoorNav(**kw))
register_env("corridor-70")(lambda **kw: Corridor(immediate_penalty=False, **kw))
register_env("corridor-70-signal")(lambda **kw: Corridor(immediate_penalty=True, **kw))
register_env("branch-18")(lambda **kw: BranchChain(**{"k": 18, **kw}))


def make_env(name: str, **overrides) -> Environment:
    builder = _REGISTRY.get(name)
    if builder is None:
        raise UnknownEnv(f"no environment named {name!r}; known: {registered_envs()}")
    return builder(**overrides)


def registered_envs() -> list[str]:
    return sorted(_REGISTRY)
