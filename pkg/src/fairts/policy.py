"""Two-layer softmax policy with hand-derived gradients."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = "FAIRTS-CKPT v1"


class CheckpointError(ValueError):
    pass


@dataclass
class PolicyParams:
    W1: np.ndarray  # (hidden, input)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (actions, hidden)
    b2: np.ndarray  # (actions,)

    @property
    def dims(self) -> tuple:
        return self.W1.shape[1], self.W1.shape[0], self.W2.shape[0]

    def arrays(self) -> tuple:
        return self.W1, self.b1, self.W2, self.b2

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    @classmethod
    def from_flat(cls, flat: np.ndarray, input_dim: int, hidden: int, actions: int) -> "PolicyParams":
        shapes = [(hidden, input_dim), (hidden,), (actions, hidden), (actions,)]
        sizes = [int(np.prod(s)) for s in shapes]
        if flat.size != sum(sizes):
            raise ValueError(f"expected {sum(sizes)} values, got {flat.size}")
        parts, pos = [], 0
        for shape, size in zip(shapes, sizes):
            parts.append(flat[pos:pos + size].reshape(shape).copy())
            pos += size
        return cls(*parts)

    def zeros_like(self) -> "PolicyParams":
        return PolicyParams(*(np.zeros_like(a) for a in self.arrays()))

    def copy(self) -> "PolicyParams":
        return PolicyParams(*(a.copy() for a in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.isfinite(a).all() for a in self.arrays())


def init_params(seed: int, input_dim: int, hidden: int, actions: int) -> PolicyParams:
    """Glorot-uniform weights, zero biases."""
    if min(input_dim, hidden, actions) < 1:
        raise ValueError("dimensions must be >= 1")
    rng = np.random.default_rng(seed)
    s1 = np.sqrt(6.0 / (input_dim + hidden))
    s2 = np.sqrt(6.0 / (hidden + actions))
    return PolicyParams(
        W1=rng.uniform(-s1, s1, size=(hidden, input_dim)),
        b1=np.zeros(hidden),
        W2=rng.uniform(-s2, s2, size=(actions, hidden)),
        b2=np.zeros(actions),
    )


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(params: PolicyParams, x: np.ndarray) -> None:
    if x.shape[-1] != params.W1.shape[1]:
        raise ValueError(
            f"observation has dimension {x.shape[-1]}, policy expects {params.W1.shape[1]}")


def forward(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    """Action probabilities for one observation or a (batch, input) stack."""
    obs = np.asarray(obs, dtype=float)
    _check_input(params, obs)
    h = np.maximum(obs @ params.W1.T + params.b1, 0.0)
    return softmax(h @ params.W2.T + params.b2)


def log_prob(params: PolicyParams, obs: np.ndarray, action: int) -> float:
    obs = np.asarray(obs, dtype=float)
    _check_input(params, obs)
    h = np.maximum(params.W1 @ obs + params.b1, 0.0)
    logits = params.W2 @ h + params.b2
    z = logits - logits.max()
    return float(z[action] - np.log(np.exp(z).sum()))


def sample_action(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw using a single uniform variate."""
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    # guard against cumsum ending a hair below 1
    return min(idx, len(probs) - 1)


def weighted_grad(params: PolicyParams, obs: np.ndarray, actions: np.ndarray,
                  weights: np.ndarray) -> PolicyParams:
    """sum_t weights[t] * grad log pi(actions[t] | obs[t]), in one batched pass."""
    X = np.atleast_2d(np.asarray(obs, dtype=float))
    _check_input(params, X)
    actions = np.atleast_1d(np.asarray(actions, dtype=np.int64))
    weights = np.atleast_1d(np.asarray(weights, dtype=float))
    pre = X @ params.W1.T + params.b1
    H = np.maximum(pre, 0.0)
    P = softmax(H @ params.W2.T + params.b2)
    G = -P
    G[np.arange(len(actions)), actions] += 1.0
    G *= weights[:, None]
    dW2 = G.T @ H
    db2 = G.sum(axis=0)
    dH = (G @ params.W2) * (pre > 0)
    dW1 = dH.T @ X
    db1 = dH.sum(axis=0)
    return PolicyParams(dW1, db1, dW2, db2)


def grad_log_prob(params: PolicyParams, obs: np.ndarray, action: int) -> PolicyParams:
    if not 0 <= action < params.W2.shape[0]:
        raise ValueError(f"action {action} out of range")
    return weighted_grad(params, obs, np.array([action]), np.array([1.0]))


def apply_update(params: PolicyParams, delta: PolicyParams) -> PolicyParams:
    if params.dims != delta.dims:
        raise ValueError(f"shape mismatch {params.dims} vs {delta.dims}")
    return PolicyParams(*(p + d for p, d in zip(params.arrays(), delta.arrays())))


def save_checkpoint(params: PolicyParams, path) -> None:
    lines = [MAGIC, "%d %d %d" % params.dims]
    for a in params.arrays():
        rows = a if a.ndim == 2 else a[None, :]
        lines.extend(" ".join("%.17g" % v for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_checkpoint(path) -> PolicyParams:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise CheckpointError(f"{path}: not a {MAGIC} file")
    try:
        input_dim, hidden, actions = (int(v) for v in lines[1].split())
    except (IndexError, ValueError):
        raise CheckpointError(f"{path}: bad dimension line") from None
    try:
        values = np.array([float(v) for line in lines[2:] for v in line.split()])
    except ValueError as e:
        raise CheckpointError(f"{path}: {e}") from None
    try:
        return PolicyParams.from_flat(values, input_dim, hidden, actions)
    except ValueError as e:
        raise CheckpointError(f"{path}: {e}") from None
