"""Critical-path training: batch construction, mini-batch fits, and the
statistical parameter-acceptance schedule.

Policy targets are 1-hot encodings of the single action executed at each
critical-path step (no Q-value smearing). Value targets are one-step
bootstrapped returns against a frozen target snapshot: y = r + gamma * V(s')
for non-terminal transitions and y = r at terminal ones. Only critical-path
transitions are ever trained on; interior lookahead transitions are not.

A trained candidate is accepted only if a one-sided Welch's t-test does not
indicate (p < 0.1) that episodes under the old parameters were better.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateSamples, EmptyDataset, NonFiniteLoss
from .mdp import CriticalPath, Observation, TransitionRecord
from .nets import MLPApproximator, TabularApproximator
from .stats import welch_t_test

REJECTION_P_THRESHOLD = 0.1  # reject strictly below; the boundary accepts


@dataclass
class TrainingBatch:
    observations: list[Observation]
    inputs: np.ndarray  # (B, D) one-hot pixel rows
    targets: np.ndarray  # (B, A) one-hot rows or (B,) value targets

    def __post_init__(self):
        if len(self.observations) != self.inputs.shape[0] or self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("batch fields are not aligned")

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass(frozen=True)
class FitConfig:
    batch_size: int = 128
    learning_rate: float = 2.5e-4
    epochs: int = 8
    seed: int = 0


def _flatten(paths: Iterable[CriticalPath | Sequence[TransitionRecord]]) -> list[TransitionRecord]:
    records = [t for path in paths for t in path]
    if not records:
        raise EmptyDataset("no critical-path transitions to train on")
    return records


def build_policy_batch(
    paths: Iterable[CriticalPath | Sequence[TransitionRecord]], n_actions: int
) -> TrainingBatch:
    """One (observation, 1-hot action) row per executed critical-path step."""
    records = _flatten(paths)
    obs = [t.obs for t in records]
    inputs = np.stack([o.to_onehot() for o in obs])
    targets = np.zeros((len(records), n_actions))
    for i, t in enumerate(records):
        targets[i, t.action] = 1.0
    return TrainingBatch(obs, inputs, targets)


def build_value_batch(
    paths: Iterable[CriticalPath | Sequence[TransitionRecord]],
    value_target: MLPApproximator | TabularApproximator,
    gamma: float = 0.99,
    reward_clip: float | None = None,
) -> TrainingBatch:
    """Temporal-difference targets against a frozen value snapshot.

    Rewards pass through raw by default; reward_clip bounds them to
    [-clip, clip] when set.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must be in (0, 1]")
    records = _flatten(paths)
    obs = [t.obs for t in records]
    inputs = np.stack([o.to_onehot() for o in obs])
    targets = np.empty(len(records))
    nonterminal = [i for i, t in enumerate(records) if not t.terminal]
    if nonterminal:
        boots = value_target.predict_value_batch([records[i].next_obs for i in nonterminal])
    for i, t in enumerate(records):
        r = t.reward
        if reward_clip is not None:
            r = min(max(r, -reward_clip), reward_clip)
        targets[i] = r
    for j, i in enumerate(nonterminal):
        targets[i] += gamma * float(boots[j])
    return TrainingBatch(obs, inputs, targets)


def _fit(net: MLPApproximator, batch: TrainingBatch, cfg: FitConfig) -> MLPApproximator:
    """Mini-batch gradient descent; deterministic given cfg.seed."""
    params = net.params.copy()
    rng = np.random.default_rng(cfg.seed)
    n = len(batch)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            sl = order[start : start + cfg.batch_size]
            loss, grad = net.loss_and_grad(batch.inputs[sl], batch.targets[sl], params)
            if not math.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss}")
            params = params - cfg.learning_rate * grad
    return net.with_params(params)


def fit_policy(net: MLPApproximator, batch: TrainingBatch, cfg: FitConfig) -> MLPApproximator:
    """Minimize categorical cross-entropy over the policy batch."""
    if net.shape.head != "softmax":
        raise ValueError("policy fit requires a softmax-head network")
    return _fit(net, batch, cfg)


def fit_value(net: MLPApproximator, batch: TrainingBatch, cfg: FitConfig) -> MLPApproximator:
    """Minimize Huber loss (delta = 1) over the value batch."""
    if net.shape.head != "linear":
        raise ValueError("value fit requires a linear-head network")
    return _fit(net, batch, cfg)


def gradient_of(net: MLPApproximator, batch: TrainingBatch) -> np.ndarray:
    """Analytic gradient of the network's configured loss over the batch."""
    _, grad = net.loss_and_grad(batch.inputs, batch.targets)
    return grad


@dataclass
class ParameterSet:
    """A matched (policy, value) snapshot moved through the schedule."""

    policy: MLPApproximator
    value: MLPApproximator

    def clone(self) -> "ParameterSet":
        return ParameterSet(self.policy.clone(), self.value.clone())


@dataclass
class ScheduleState:
    """Incumbent parameters plus the reward samples feeding the t-test."""

    incumbent: ParameterSet
    interval_index: int = 0
    rewards_prev: list[float] | None = None  # episodes under the incumbent
    rewards_curr: list[float] | None = None  # episodes under the candidate


def schedule_decision(e_old: Sequence[float], e_new: Sequence[float]) -> tuple[bool, float]:
    """(accepted, p) for a candidate given old/new episode-reward samples.

    p is the one-sided probability that the old parameters were better;
    rejection happens iff p < 0.1. Samples the test cannot discriminate count
    as acceptance (no evidence of deterioration), reported as p = 0.5.
    """
    try:
        p = welch_t_test(e_old, e_new)
    except DegenerateSamples:
        return True, 0.5
    return bool(p >= REJECTION_P_THRESHOLD), float(p)


def update_network_parameters(
    schedule: ScheduleState,
    candidate: ParameterSet,
    e_old: Sequence[float],
    e_new: Sequence[float],
) -> tuple[ParameterSet, bool]:
    """Accept the candidate as incumbent unless the t-test rejects it."""
    accepted, p = schedule_decision(e_old, e_new)
    schedule.interval_index += 1
    schedule.rewards_prev = list(e_old)
    schedule.rewards_curr = list(e_new)
    if accepted:
        schedule.incumbent = candidate
    return schedule.incumbent, accepted


def zero_lr(cfg: FitConfig) -> FitConfig:
    return replace(cfg, learning_rate=0.0)
