"""Vehicular URLLC access-point selection.

A vehicle drives along a straight road in +x at constant speed. Each episode
is one task: the agent picks an AP once and the whole transmission is then
resolved analytically (wait for coverage, transmit, check the deadline).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from enum import Enum

import numpy as np

from ..core import RngStream, StateVec, encode_discrete
from ..errors import ConfigError, EpisodeOver
from .base import EnvSnapshot, rng_state, set_rng_state


@dataclass(frozen=True)
class AccessPoint:
    position: float  # m along the road
    radius: float  # m, coverage half-width
    rate: float  # bit/s
    cost_per_second: float

    def validate(self) -> None:
        if not (self.radius > 0 and self.rate > 0 and self.cost_per_second >= 0):
            raise ConfigError(f"invalid access point {self}")


@dataclass(frozen=True)
class UrllcTask:
    size: float  # bits
    deadline: float  # s


class Phase(str, Enum):
    CHOOSING = "CHOOSING"
    DONE = "DONE"


class Outcome(str, Enum):
    SUCCESS = "SUCCESS"
    FAIL_NO_COVERAGE = "FAIL_NO_COVERAGE"
    FAIL_LEFT_COVERAGE = "FAIL_LEFT_COVERAGE"
    FAIL_DEADLINE = "FAIL_DEADLINE"


@dataclass(frozen=True)
class TransmissionOutcome:
    outcome: Outcome
    wait_time: float
    tx_time: float  # seconds actually spent transmitting
    latency: float
    cost: float


@dataclass(frozen=True)
class UrllcEnvState:
    vehicle_pos: float
    vehicle_speed: float
    elapsed: float
    task: UrllcTask
    aps: tuple[AccessPoint, ...]
    phase: Phase

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phase"] = self.phase.value
        return d


DEFAULT_APS = (
    AccessPoint(400.0, 250.0, 10e6, 1.0),
    AccessPoint(900.0, 150.0, 50e6, 4.0),
    AccessPoint(1300.0, 300.0, 20e6, 2.0),
    AccessPoint(1800.0, 200.0, 40e6, 3.0),
    AccessPoint(600.0, 200.0, 25e6, 1.5),
)


@dataclass(frozen=True)
class UrllcConfig:
    road_length: float = 2000.0
    speed: float = 20.0
    aps: tuple[AccessPoint, ...] = DEFAULT_APS
    task_size: float = 20e6
    deadline: float = 6.0
    w_success: float = 100.0
    w_lat: float = 5.0
    w_cost: float = 1.0
    bins: int = 100
    start_fraction: float = 0.5
    full_obs: bool = False

    def validate(self) -> None:
        if not self.road_length > 0:
            raise ConfigError("road_length must be > 0")
        if not self.speed > 0:
            raise ConfigError("speed must be > 0")
        if len(self.aps) < 1:
            raise ConfigError("at least one access point is required")
        for ap in self.aps:
            ap.validate()
        if not (self.task_size > 0 and self.deadline > 0):
            raise ConfigError("task size and deadline must be > 0")
        if self.bins < 1:
            raise ConfigError("bins must be >= 1")
        if not 0 < self.start_fraction <= 1:
            raise ConfigError("start_fraction must be in (0, 1]")

    @property
    def task(self) -> UrllcTask:
        return UrllcTask(self.task_size, self.deadline)

    def reward_bounds(self) -> tuple[float, float]:
        """Concrete (low, high) reward bounds implied by the config."""
        max_tx = max(self.task_size / ap.rate for ap in self.aps)
        max_cost = max(ap.cost_per_second * self.task_size / ap.rate for ap in self.aps)
        low = -self.w_lat * (self.road_length / self.speed + max_tx) - self.w_cost * max_cost
        return low, self.w_success

    def with_aps(self, aps) -> "UrllcConfig":
        return replace(self, aps=tuple(aps))


def urllc_reset(config: UrllcConfig, rng: np.random.Generator) -> UrllcEnvState:
    config.validate()
    pos = float(rng.uniform(0.0, config.road_length * config.start_fraction))
    return UrllcEnvState(pos, config.speed, 0.0, config.task, tuple(config.aps), Phase.CHOOSING)


def transmission(state: UrllcEnvState, ap: AccessPoint) -> TransmissionOutcome:
    """Resolve one transmission attempt to ``ap`` from ``state``."""
    x, v = state.vehicle_pos, state.vehicle_speed
    lo, hi = ap.position - ap.radius, ap.position + ap.radius
    if x > hi:
        return TransmissionOutcome(Outcome.FAIL_NO_COVERAGE, 0.0, 0.0, 0.0, 0.0)
    wait = 0.0 if x >= lo else (lo - x) / v
    start = max(x, lo)
    residence = (hi - start) / v
    tx = state.task.size / ap.rate
    if tx > residence:
        return TransmissionOutcome(
            Outcome.FAIL_LEFT_COVERAGE, wait, residence, wait + residence, ap.cost_per_second * residence
        )
    latency = wait + tx
    outcome = Outcome.FAIL_DEADLINE if latency > state.task.deadline else Outcome.SUCCESS
    return TransmissionOutcome(outcome, wait, tx, latency, ap.cost_per_second * tx)


def urllc_step(state: UrllcEnvState, action: int, config: UrllcConfig):
    """Returns ``(next_state, reward, terminal, TransmissionOutcome)``."""
    if state.phase is Phase.DONE:
        raise EpisodeOver("URLLC episode already finished")
    if not 0 <= action < len(state.aps):
        raise ValueError(f"action {action} outside 0..{len(state.aps) - 1}")
    info = transmission(state, state.aps[action])
    success = 1.0 if info.outcome is Outcome.SUCCESS else 0.0
    reward = config.w_success * success - config.w_lat * info.latency - config.w_cost * info.cost
    nxt = replace(
        state,
        vehicle_pos=state.vehicle_pos + state.vehicle_speed * info.latency,
        elapsed=state.elapsed + info.latency,
        phase=Phase.DONE,
    )
    return nxt, reward, True, info


class UrllcEnv:
    name = "urllc"
    stochastic = False  # only reset draws from the env stream
    steps_per_episode = 1

    def __init__(self, config: UrllcConfig | None = None, seed: int = 0):
        self.config = config or UrllcConfig()
        self.config.validate()
        self.seed = seed
        self.rng = RngStream(seed, "env").generator()
        self.action_count = len(self.config.aps)
        self.state_count = self.config.bins
        self.obs_dim = 1 + (len(self.config.aps) if self.config.full_obs else 0)
        # placeholder until the first reset
        self.state = UrllcEnvState(0.0, self.config.speed, 0.0, self.config.task, tuple(self.config.aps), Phase.DONE)

    def reset(self) -> StateVec:
        self.state = urllc_reset(self.config, self.rng)
        return self.observe()

    def step(self, action: int):
        self.state, reward, terminal, info = urllc_step(self.state, int(action), self.config)
        return self.observe(), reward, terminal, info

    def _discrete(self, x: float) -> int:
        return encode_discrete(x, self.config.bins, 0.0, self.config.road_length)

    def observe(self) -> StateVec:
        if self.config.full_obs:
            return self.full_observation()
        x = self.state.vehicle_pos
        return StateVec((x,), self._discrete(x))

    def full_observation(self) -> StateVec:
        x = self.state.vehicle_pos
        return StateVec((x,) + tuple(ap.position for ap in self.state.aps), self._discrete(x))

    def snapshot(self) -> EnvSnapshot:
        # UrllcEnvState is immutable, so sharing it is a copy
        return EnvSnapshot(self.name, self.state, rng_state(self.rng))

    def restore(self, snapshot: EnvSnapshot) -> None:
        self.state = snapshot.state
        set_rng_state(self.rng, snapshot.rng_state)

    def reseed(self, rng: np.random.Generator) -> None:
        self.rng = np.random.Generator(np.random.PCG64(rng.integers(0, 2**63)))

    def replica(self) -> "UrllcEnv":
        return UrllcEnv(self.config, self.seed)
