from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from ..core import StateVec


@dataclass(frozen=True)
class EnvSnapshot:
    """Restorable copy of an environment: its state object plus RNG position."""

    env: str
    state: Any
    rng_state: dict

    def serialize(self) -> str:
        """Canonical JSON text of the full snapshot (floats written exactly)."""
        return json.dumps(
            {"env": self.env, "state": _plain(self.state), "rng": self.rng_state},
            sort_keys=True,
        )


def _plain(obj):
    if hasattr(obj, "to_dict"):
        return _plain(obj.to_dict())
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, float):
        return repr(obj)
    return obj


def rng_state(rng: np.random.Generator) -> dict:
    # the property builds a fresh dict of immutable ints on every access
    return rng.bit_generator.state


def set_rng_state(rng: np.random.Generator, state: dict) -> None:
    rng.bit_generator.state = state


class Environment(Protocol):
    """What the trainer and digital domains need from an environment.

    ``stochastic`` is true when ``step`` draws from the env RNG; rollouts only
    reseed replicas of such environments. An environment may also offer
    ``rollout_batch(snapshot, count)`` returning an object with an ``obs``
    array of shape (count, obs_dim) and ``step(rows, actions) -> (rewards,
    terminals)``; rollouts then run as one vectorized batch.
    """

    name: str
    stochastic: bool
    action_count: int
    obs_dim: int
    state_count: int | None
    steps_per_episode: int

    def reset(self) -> StateVec: ...

    def step(self, action: int) -> tuple[StateVec, float, bool, Any]: ...

    def observe(self) -> StateVec: ...

    def full_observation(self) -> StateVec: ...

    def snapshot(self) -> EnvSnapshot: ...

    def restore(self, snapshot: EnvSnapshot) -> None: ...

    def reseed(self, rng: np.random.Generator) -> None: ...

    def replica(self) -> "Environment": ...
