from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import RngStream, StateVec
from .mlp import Adam, MlpParams, bootstrap_targets, init_mlp, mlp_forward, train_arrays


@dataclass
class DqnParams:
    """Online network plus the periodically synced target network."""

    online: MlpParams
    target: MlpParams

    def copy(self) -> "DqnParams":
        return DqnParams(self.online.copy(), self.target.copy())

    def __eq__(self, other):
        if not isinstance(other, DqnParams):
            return NotImplemented
        return self.online == other.online and self.target == other.target


class DqnAgent:
    def __init__(
        self,
        obs_dim: int,
        action_count: int,
        hidden=(128, 128),
        lr: float = 1e-3,
        discount: float = 0.95,
        target_sync: int = 500,
        seed: int = 0,
    ):
        sizes = (obs_dim, *hidden, action_count)
        self.online = init_mlp(sizes, RngStream(seed, "agent-init").generator())
        self.target = self.online.copy()
        self.optimizer = Adam(self.online, lr)
        self.discount = discount
        self.target_sync = target_sync
        self.updates = 0
        self.target_version = 0

    @property
    def action_count(self) -> int:
        return self.online.action_count

    def act(self, state: StateVec, eps: float, rng: np.random.Generator) -> int:
        if rng.random() < eps:
            return int(rng.integers(self.action_count))
        return int(np.argmax(mlp_forward(self.online, state.values)))

    def targets_for(self, rewards, next_states, terminals) -> np.ndarray:
        return bootstrap_targets(self.target, rewards, next_states, terminals, self.discount)

    def update(self, X, actions, targets) -> float:
        """One minibatch step; the target net is refreshed every ``target_sync`` updates."""
        loss = train_arrays(self.online, self.optimizer, X, actions, targets)
        self.updates += 1
        if self.updates % self.target_sync == 0:
            self.target = self.online.copy()
            self.target_version += 1
        return loss

    def params(self) -> DqnParams:
        return DqnParams(self.online, self.target)
