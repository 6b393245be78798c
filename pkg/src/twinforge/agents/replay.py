from __future__ import annotations

import numpy as np

from ..core import DomainId, Kind, Role, StateVec, Transition


class ReplayBuffer:
    """Fixed-capacity ring of transitions with optional precomputed targets.

    Stored column-wise so minibatches come out as arrays without touching
    Python objects. Eviction is oldest-first.
    """

    def __init__(self, capacity: int, obs_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.obs_dim = obs_dim
        self.states = np.zeros((capacity, obs_dim))
        self.next_states = np.zeros((capacity, obs_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity)
        self.targets = np.full(capacity, np.nan)
        self.state_ids = np.full(capacity, -1, dtype=np.int64)
        self.next_ids = np.full(capacity, -1, dtype=np.int64)
        self.kinds = np.zeros(capacity, dtype=np.int8)
        self.domains = np.zeros(capacity, dtype=np.int32)
        self.roles = np.zeros(capacity, dtype=np.int8)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, t: Transition, target: float | None = None) -> None:
        i = self._next
        self.states[i] = t.state.values
        self.next_states[i] = t.next_state.values
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.terminals[i] = float(t.terminal)
        self.targets[i] = np.nan if target is None else target
        self.state_ids[i] = -1 if t.state.discrete_id is None else t.state.discrete_id
        self.next_ids[i] = -1 if t.next_state.discrete_id is None else t.next_state.discrete_id
        self.kinds[i] = t.kind
        self.domains[i] = t.domain.id
        self.roles[i] = t.domain.role
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def _record(self, i: int) -> tuple[Transition, float | None]:
        sid, nid = int(self.state_ids[i]), int(self.next_ids[i])
        t = Transition(
            StateVec(tuple(self.states[i].tolist()), None if sid < 0 else sid),
            int(self.actions[i]),
            float(self.rewards[i]),
            StateVec(tuple(self.next_states[i].tolist()), None if nid < 0 else nid),
            bool(self.terminals[i]),
            DomainId(int(self.domains[i]), Role(int(self.roles[i]))),
            Kind(int(self.kinds[i])),
        )
        y = float(self.targets[i])
        return t, (None if np.isnan(y) else y)

    def records(self) -> list[tuple[Transition, float | None]]:
        """Surviving records, oldest first."""
        return [self._record(int(i)) for i in self._order()]

    def transitions(self) -> list[Transition]:
        return [t for t, _ in self.records()]

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform indices, with replacement."""
        return rng.integers(0, self._size, size=count)
