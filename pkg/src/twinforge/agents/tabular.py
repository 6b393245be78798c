from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..core import StateVec, Transition
from ..errors import NumericError


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from ``eps_start`` to ``eps_end``.

    ``progress`` is measured in episode-equivalents of training data, so a
    strategy that learns from more transitions per step anneals faster.
    """

    eps_start: float = 1.0
    eps_end: float = 0.05
    decay_episodes: float = 1.0

    def __post_init__(self):
        if not (0 <= self.eps_end <= self.eps_start <= 1):
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        if not self.decay_episodes > 0:
            raise ValueError("decay_episodes must be positive")

    def value(self, progress: float) -> float:
        frac = min(max(progress / self.decay_episodes, 0.0), 1.0)
        if frac == 1.0:
            return self.eps_end
        return self.eps_start + (self.eps_end - self.eps_start) * frac


@dataclass
class QTable:
    values: np.ndarray
    learning_rate: float = 0.1
    discount: float = 0.95

    @classmethod
    def zeros(cls, state_count: int, action_count: int, learning_rate=0.1, discount=0.95, init_q=0.0):
        return cls(np.full((state_count, action_count), float(init_q)), learning_rate, discount)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def copy(self) -> "QTable":
        return QTable(self.values.copy(), self.learning_rate, self.discount)

    def __eq__(self, other):
        if not isinstance(other, QTable):
            return NotImplemented
        return (
            self.learning_rate == other.learning_rate
            and self.discount == other.discount
            and np.array_equal(self.values, other.values)
        )


def ql_select(q: QTable, s: int, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy; greedy ties go to the lowest index."""
    row = q.values[s]
    if rng.random() < eps:
        return int(rng.integers(row.shape[0]))
    return int(np.argmax(row))


def ql_update(q: QTable, t: Transition, target_override: float | None = None) -> float:
    """One tabular backup; returns the TD error that was applied."""
    s, a = t.state.discrete_id, t.action
    if target_override is not None:
        target = float(target_override)
    elif t.terminal:
        target = t.reward
    else:
        target = t.reward + q.discount * float(q.values[t.next_state.discrete_id].max())
    if not math.isfinite(target):
        raise NumericError(f"non-finite TD target {target!r}")
    td = target - q.values[s, a]
    q.values[s, a] += q.learning_rate * td
    return float(td)


@dataclass
class QlAgent:
    table: QTable
    visits: np.ndarray = field(init=False)

    def __post_init__(self):
        self.visits = np.zeros(self.table.shape, dtype=np.int64)

    @classmethod
    def build(cls, state_count, action_count, learning_rate=0.1, discount=0.95, init_q=0.0):
        return cls(QTable.zeros(state_count, action_count, learning_rate, discount, init_q))

    @property
    def action_count(self) -> int:
        return self.table.shape[1]

    @property
    def discount(self) -> float:
        return self.table.discount

    def act(self, state: StateVec, eps: float, rng: np.random.Generator) -> int:
        return ql_select(self.table, state.discrete_id, eps, rng)

    def learn(self, t: Transition, target: float | None = None) -> float:
        self.visits[t.state.discrete_id, t.action] += 1
        return ql_update(self.table, t, target)

    def params(self) -> QTable:
        return self.table
