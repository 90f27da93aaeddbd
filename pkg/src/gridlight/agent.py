"""Per-intersection DQN agents with a single shared network.

All intersections share one parameter set; observations are encoded per
agent, combined through graph attention over the intersection graph, and a
Q head scores the phase actions. Training follows the standard replay +
frozen-target DQN update.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError, ShapeError
from .net import LANES_PER_INTERSECTION, NUM_PHASES
from .nn import model as nn_model
from .nn.model import AdamState, NetworkSpec


@dataclass
class AgentConfig:
    hidden: int = 20
    gat_layers: int = 1
    heads: int = 5
    queue_cap: float = 30.0
    gamma: float = 0.8
    lr: float = 1e-3
    batch_size: int = 32
    replay_capacity: int = 10_000
    eps_start: float = 0.8
    eps_end: float = 0.05
    eps_decay_frac: float = 0.6
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ConfigError("gamma must lie in [0, 1]")
        if self.queue_cap <= 0 or self.lr <= 0:
            raise ConfigError("queue_cap and lr must be positive")
        if self.batch_size < 1 or self.replay_capacity < 1:
            raise ConfigError("batch_size and replay_capacity must be >= 1")

    def network_spec(self) -> NetworkSpec:
        return NetworkSpec(
            in_dim=LANES_PER_INTERSECTION + NUM_PHASES,
            hidden=self.hidden,
            gat_layers=self.gat_layers,
            heads=self.heads,
            out_dim=NUM_PHASES,
        )


@dataclass
class Observation:
    queues: np.ndarray  # per-lane queued counts, length 12
    phase: int
    num_phases: int = NUM_PHASES

    def validate(self):
        if len(self.queues) != LANES_PER_INTERSECTION:
            raise ShapeError(f"expected {LANES_PER_INTERSECTION} lane counts")
        if np.any(np.asarray(self.queues) < 0):
            raise ShapeError("queue counts must be non-negative")
        if not (0 <= self.phase < self.num_phases):
            raise ShapeError(f"phase {self.phase} out of range")


def encode(obs: Observation, queue_cap: float = 30.0) -> np.ndarray:
    """Clamp-normalized queue counts concatenated with the phase one-hot."""
    obs.validate()
    q = np.minimum(np.asarray(obs.queues, dtype=float) / queue_cap, 1.0)
    onehot = np.zeros(obs.num_phases)
    onehot[obs.phase] = 1.0
    return np.concatenate([q, onehot])


@dataclass
class Transition:
    feats: np.ndarray  # (N, F) encoded observations at t
    actions: np.ndarray  # (N,)
    rewards: np.ndarray  # (N,) shaped rewards
    next_feats: np.ndarray  # (N, F)


class ReplayBuffer:
    """FIFO ring buffer of transitions."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("replay capacity must be >= 1")
        self.capacity = capacity
        self._items: list[Transition] = []
        self._cursor = 0
        self.inserted = 0

    def push(self, item: Transition):
        if len(self._items) < self.capacity:
            self._items.append(item)
        else:
            self._items[self._cursor] = item
            self._cursor = (self._cursor + 1) % self.capacity
        self.inserted += 1

    def __len__(self):
        return len(self._items)

    def sample(self, rng, k: int):
        if k > len(self._items):
            raise ConfigError("not enough transitions to sample")
        idx = rng.choice(len(self._items), size=k, replace=False)
        return [self._items[int(i)] for i in idx]


@dataclass
class PolicyState:
    spec: NetworkSpec
    config: AgentConfig
    online: dict
    target: dict
    adam: AdamState
    updates: int = 0

    @classmethod
    def create(cls, config: AgentConfig, rng) -> "PolicyState":
        config.validate()
        spec = config.network_spec()
        online = nn_model.init_params(spec, rng)
        return cls(
            spec=spec,
            config=config,
            online=online,
            target=nn_model.clone_params(online),
            adam=AdamState.for_params(online),
        )


def q_values(policy: PolicyState, feats, ptr, idx, use_target: bool = False):
    """Q values (N, num_phases) for all agents under the shared network."""
    params = policy.target if use_target else policy.online
    q, _ = nn_model.forward(params, policy.spec, feats, ptr, idx)
    return q


def epsilon_at(step: int, total_steps: int, cfg: AgentConfig) -> float:
    """Linear decay from eps_start to eps_end over the first decay fraction."""
    horizon = max(1.0, cfg.eps_decay_frac * total_steps)
    frac = min(1.0, step / horizon)
    return cfg.eps_start + (cfg.eps_end - cfg.eps_start) * frac


def select_action(q, epsilon: float, rng) -> int:
    """Epsilon-greedy over one agent's Q vector; ties break to lowest index."""
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        raise ShapeError("empty Q vector")
    if not (0.0 <= epsilon <= 1.0):
        raise ConfigError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(0, q.size))
    return int(np.argmax(q))


def tile_csr(ptr, idx, copies: int):
    """Block-diagonal replication of a CSR graph for batched forward passes."""
    n = ptr.shape[0] - 1
    e = idx.shape[0]
    big_idx = np.concatenate([idx + c * n for c in range(copies)])
    big_ptr = np.concatenate(
        [[0]] + [ptr[1:] + c * e for c in range(copies)]
    ).astype(np.int64)
    return big_ptr, np.ascontiguousarray(big_idx, dtype=np.int64)


def dqn_update(policy: PolicyState, batch, ptr, idx, gamma=None, lr=None) -> float:
    """One squared-error DQN step on the online parameters.

    Targets come from the frozen target network; returns the pre-step loss.
    """
    if not batch:
        raise ConfigError("empty batch")
    cfg = policy.config
    gamma = cfg.gamma if gamma is None else gamma
    lr = cfg.lr if lr is None else lr
    if not (0.0 <= gamma <= 1.0):
        raise ConfigError("gamma must lie in [0, 1]")
    b = len(batch)
    n = batch[0].feats.shape[0]
    feats = np.vstack([tr.feats for tr in batch])
    next_feats = np.vstack([tr.next_feats for tr in batch])
    actions = np.concatenate([tr.actions for tr in batch]).astype(np.int64)
    rewards = np.concatenate([tr.rewards for tr in batch]).astype(float)
    if feats.shape[0] != b * n or actions.shape[0] != b * n:
        raise ShapeError("inconsistent transition shapes in batch")
    bptr, bidx = tile_csr(ptr, idx, b)
    q_next, _ = nn_model.forward(policy.target, policy.spec, next_feats, bptr, bidx)
    targets = rewards + gamma * q_next.max(axis=1)
    q_pred, trace = nn_model.forward(policy.online, policy.spec, feats, bptr, bidx)
    rows = np.arange(b * n)
    err = q_pred[rows, actions] - targets
    loss = float(np.mean(err ** 2))
    if not np.isfinite(loss):
        raise NumericError("non-finite DQN loss")
    g_q = np.zeros_like(q_pred)
    g_q[rows, actions] = 2.0 * err / (b * n)
    grads = nn_model.backward(policy.online, policy.spec, trace, bptr, bidx, g_q)
    nn_model.adam_update(
        policy.online, grads, policy.adam, lr,
        beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps,
    )
    policy.updates += 1
    return loss


def sync_target(policy: PolicyState) -> PolicyState:
    policy.target = nn_model.clone_params(policy.online)
    return policy
