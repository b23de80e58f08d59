"""Function approximators: a small reference MLP and a tabular lookup.

The MLP keeps its weights in one flat float64 vector, computes analytic
gradients for both losses (categorical cross-entropy on the softmax head,
Huber on the linear head), and is bitwise deterministic given a seed.
Parameter checkpoints use a portable little-endian binary format.

Observations feed the network as a flattened one-hot-per-pixel vector.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mdp import Observation

HEAD_LINEAR = "linear"
HEAD_SOFTMAX = "softmax"

CHECKPOINT_MAGIC = b"WPCK"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class NetworkShape:
    input_dim: int
    action_count: int
    hidden: tuple[int, ...] = (64, 64)
    head: str = HEAD_SOFTMAX

    @property
    def output_dim(self) -> int:
        return self.action_count if self.head == HEAD_SOFTMAX else 1

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden, self.output_dim)

    @property
    def param_count(self) -> int:
        dims = self.dims
        return sum(dims[i] * dims[i + 1] + dims[i + 1] for i in range(len(dims) - 1))


def init_params(shape: NetworkShape, rng: np.random.Generator) -> np.ndarray:
    """He-scaled normal weights, zero biases."""
    dims = shape.dims
    parts = []
    for i in range(len(dims) - 1):
        fan_in = dims[i]
        scale = np.sqrt(2.0 / fan_in) if i < len(dims) - 2 else np.sqrt(1.0 / fan_in)
        parts.append(rng.normal(0.0, scale, size=dims[i] * dims[i + 1]))
        parts.append(np.zeros(dims[i + 1]))
    return np.concatenate(parts)


def _unpack(shape: NetworkShape, params: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    dims = shape.dims
    layers = []
    off = 0
    for i in range(len(dims) - 1):
        n_w = dims[i] * dims[i + 1]
        w = params[off : off + n_w].reshape(dims[i], dims[i + 1])
        off += n_w
        b = params[off : off + dims[i + 1]]
        off += dims[i + 1]
        layers.append((w, b))
    return layers


def _forward(shape: NetworkShape, params: np.ndarray, x: np.ndarray):
    """Returns (head output, per-layer activation cache)."""
    layers = _unpack(shape, params)
    acts = [x]
    pre = []
    h = x
    for i, (w, b) in enumerate(layers):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < len(layers) - 1 else z
        acts.append(h)
    if shape.head == HEAD_SOFTMAX:
        z = acts[-1]
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        out = e / e.sum(axis=1, keepdims=True)
    else:
        out = acts[-1][:, 0]
    return out, (layers, acts, pre)


def _backward(shape: NetworkShape, cache, d_out: np.ndarray) -> np.ndarray:
    """Backpropagate d(loss)/d(final pre-activation) into a flat gradient."""
    layers, acts, pre = cache
    grads: list[np.ndarray] = []
    delta = d_out
    for i in reversed(range(len(layers))):
        w, _ = layers[i]
        gw = acts[i].T @ delta
        gb = delta.sum(axis=0)
        grads.append(gb)
        grads.append(gw.ravel())
        if i > 0:
            delta = (delta @ w.T) * (pre[i - 1] > 0.0)
    grads.reverse()
    return np.concatenate(grads)


def policy_loss_and_grad(
    shape: NetworkShape, params: np.ndarray, x: np.ndarray, y_onehot: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean categorical cross-entropy and its flat gradient."""
    probs, cache = _forward(shape, params, x)
    n = x.shape[0]
    eps = 1e-12
    loss = -float(np.sum(y_onehot * np.log(probs + eps))) / n
    d_logits = (probs - y_onehot) / n
    return loss, _backward(shape, cache, d_logits)


def value_loss_and_grad(
    shape: NetworkShape,
    params: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    delta: float = 1.0,
) -> tuple[float, np.ndarray]:
    """Mean Huber loss and its flat gradient."""
    v, cache = _forward(shape, params, x)
    n = x.shape[0]
    r = v - y
    absr = np.abs(r)
    quad = absr <= delta
    loss = float(np.sum(np.where(quad, 0.5 * r * r, delta * (absr - 0.5 * delta)))) / n
    d_v = np.clip(r, -delta, delta) / n
    return loss, _backward(shape, cache, d_v[:, None])


class MLPApproximator:
    """Two-hidden-layer ReLU network over one-hot pixel inputs."""

    def __init__(self, shape: NetworkShape, params: np.ndarray):
        if params.shape != (shape.param_count,):
            raise ValueError(
                f"parameter vector of length {params.shape} does not match "
                f"shape needing {shape.param_count}"
            )
        self.shape = shape
        self.params = np.asarray(params, dtype=np.float64)

    @classmethod
    def create(
        cls,
        obs: Observation,
        action_count: int,
        head: str,
        hidden: tuple[int, ...] = (64, 64),
        seed: int = 0,
    ) -> "MLPApproximator":
        shape = NetworkShape(obs.onehot_size, action_count, hidden, head)
        return cls(shape, init_params(shape, np.random.default_rng(seed)))

    def with_params(self, params: np.ndarray) -> "MLPApproximator":
        return MLPApproximator(self.shape, params)

    def clone(self) -> "MLPApproximator":
        return MLPApproximator(self.shape, self.params.copy())

    # -- prediction --------------------------------------------------------

    def encode(self, obs: Observation) -> np.ndarray:
        return obs.to_onehot()

    def encode_batch(self, observations: Sequence[Observation]) -> np.ndarray:
        return np.stack([o.to_onehot() for o in observations])

    def predict_policy(self, obs: Observation) -> np.ndarray:
        if self.shape.head != HEAD_SOFTMAX:
            raise ValueError("policy prediction requires a softmax head")
        out, _ = _forward(self.shape, self.params, self.encode(obs)[None, :])
        return out[0]

    def predict_value(self, obs: Observation) -> float:
        if self.shape.head != HEAD_LINEAR:
            raise ValueError("value prediction requires a linear head")
        out, _ = _forward(self.shape, self.params, self.encode(obs)[None, :])
        return float(out[0])

    def predict_value_batch(self, observations: Sequence[Observation]) -> np.ndarray:
        if not len(observations):
            return np.zeros(0)
        out, _ = _forward(self.shape, self.params, self.encode_batch(observations))
        return out

    def loss_and_grad(self, x: np.ndarray, targets: np.ndarray, params: np.ndarray | None = None):
        p = self.params if params is None else params
        if self.shape.head == HEAD_SOFTMAX:
            return policy_loss_and_grad(self.shape, p, x, targets)
        return value_loss_and_grad(self.shape, p, x, targets)


class TabularApproximator:
    """Exact lookup table keyed by observation; for convergence tests.

    Policy mode stores the empirical action distribution of the fitted
    targets; value mode stores the per-observation target mean. Unseen
    observations fall back to uniform / zero.
    """

    def __init__(self, action_count: int, head: str = HEAD_SOFTMAX):
        self.action_count = action_count
        self.head = head
        self.table: dict[Observation, np.ndarray] = {}

    def predict_policy(self, obs: Observation) -> np.ndarray:
        got = self.table.get(obs)
        if got is None:
            return np.full(self.action_count, 1.0 / self.action_count)
        return got

    def predict_value(self, obs: Observation) -> float:
        got = self.table.get(obs)
        return 0.0 if got is None else float(got[0])

    def predict_value_batch(self, observations: Sequence[Observation]) -> np.ndarray:
        return np.array([self.predict_value(o) for o in observations])

    def fit(self, observations: Sequence[Observation], targets: np.ndarray) -> None:
        targets = np.asarray(targets, dtype=float)
        if targets.ndim == 1:
            targets = targets[:, None]
        groups: dict[Observation, list[np.ndarray]] = {}
        for obs, t in zip(observations, targets):
            groups.setdefault(obs, []).append(t)
        for obs, rows in groups.items():
            mean = np.mean(rows, axis=0)
            if self.head == HEAD_SOFTMAX:
                total = mean.sum()
                mean = mean / total if total > 0 else np.full(self.action_count, 1.0 / self.action_count)
            self.table[obs] = mean


# -- checkpoint serialization ----------------------------------------------

_HEAD_CODES = {HEAD_LINEAR: 0, HEAD_SOFTMAX: 1}
_HEAD_NAMES = {v: k for k, v in _HEAD_CODES.items()}


def save_params(path, shape: NetworkShape, params: np.ndarray) -> None:
    """Write magic header, dims, and little-endian float64 parameters."""
    dims = shape.dims
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IBI", CHECKPOINT_VERSION, _HEAD_CODES[shape.head], shape.action_count))
        fh.write(struct.pack("<I", len(dims)))
        fh.write(struct.pack(f"<{len(dims)}I", *dims))
        fh.write(np.asarray(params, dtype="<f8").tobytes())


def load_params(path) -> tuple[NetworkShape, np.ndarray]:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"bad checkpoint magic {magic!r}")
        version, head_code, action_count = struct.unpack("<IBI", fh.read(9))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        (n_dims,) = struct.unpack("<I", fh.read(4))
        dims = struct.unpack(f"<{n_dims}I", fh.read(4 * n_dims))
        shape = NetworkShape(
            input_dim=dims[0],
            action_count=action_count,
            hidden=tuple(dims[1:-1]),
            head=_HEAD_NAMES[head_code],
        )
        params = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    if params.shape != (shape.param_count,):
        raise ValueError("checkpoint parameter count does not match its dims")
    return shape, params
