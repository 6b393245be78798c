"""Finite MDP with an explicit model, used for oracle checks of TD targets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import RngStream, StateVec
from ..errors import ConfigError, EpisodeOver
from .base import EnvSnapshot, rng_state, set_rng_state


@dataclass(frozen=True)
class MdpState:
    s: int
    done: bool

    def to_dict(self) -> dict:
        return {"s": self.s, "done": self.done}


class TabularMdp:
    """``P[s, a, s']`` transition probabilities, ``R[s, a, s']`` rewards.

    Entering a state flagged in ``terminal`` ends the episode.
    """

    name = "mdp"
    stochastic = True

    def __init__(self, P, R, terminal, start: int = 0, seed: int = 0, horizon: int | None = None):
        self.P = np.asarray(P, dtype=np.float64)
        self.R = np.asarray(R, dtype=np.float64)
        self.terminal = np.asarray(terminal, dtype=bool)
        S, A, S2 = self.P.shape
        if S != S2 or self.R.shape != self.P.shape or self.terminal.shape != (S,):
            raise ConfigError("inconsistent MDP shapes")
        if not np.allclose(self.P.sum(axis=2), 1.0):
            raise ConfigError("transition rows must sum to 1")
        self.start = start
        self.seed = seed
        self.action_count = A
        self.state_count = S
        self.obs_dim = 1
        self.steps_per_episode = horizon or S
        self.rng = RngStream(seed, "env").generator()
        self._cdf = np.cumsum(self.P, axis=2)
        self.state = MdpState(start, True)

    def reset(self) -> StateVec:
        self.state = MdpState(self.start, False)
        return self.observe()

    def step(self, action: int):
        if self.state.done:
            raise EpisodeOver("MDP episode already finished")
        s = self.state.s
        row = self._cdf[s, action]
        nxt = int(np.searchsorted(row, self.rng.random() * row[-1], side="right"))
        nxt = min(nxt, self.state_count - 1)
        done = bool(self.terminal[nxt])
        self.state = MdpState(nxt, done)
        return self.observe(), float(self.R[s, action, nxt]), done, None

    def observe(self) -> StateVec:
        return StateVec((float(self.state.s),), self.state.s)

    full_observation = observe

    def snapshot(self) -> EnvSnapshot:
        return EnvSnapshot(self.name, self.state, rng_state(self.rng))

    def restore(self, snapshot: EnvSnapshot) -> None:
        self.state = snapshot.state
        set_rng_state(self.rng, snapshot.rng_state)

    def reseed(self, rng: np.random.Generator) -> None:
        self.rng = np.random.Generator(np.random.PCG64(rng.integers(0, 2**63)))

    def replica(self) -> "TabularMdp":
        return TabularMdp(self.P, self.R, self.terminal, self.start, self.seed, self.steps_per_episode)
