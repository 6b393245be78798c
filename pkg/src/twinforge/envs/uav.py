"""Multi-UAV coverage: M UAVs at fixed height serve U ground users.

Each user is served by whichever UAV gives it the best free-space (Friis)
rate; users get orthogonal OFDM sub-bands so there is no interference term.
One central agent moves all UAVs jointly, each UAV picking one of
{hover, +x, -x, +y, -y} per one-second step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from ..core import RngStream, StateVec
from ..errors import ConfigError, EpisodeOver, InvalidDistance
from .base import EnvSnapshot, rng_state, set_rng_state

MOVES = np.array([[0.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
MOVE_NAMES = ("hover", "+x", "-x", "+y", "-y")


def dbm_per_hz_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class LinkBudget:
    tx_power: float = 0.1  # W
    noise_psd: float = dbm_per_hz_to_watts(-174.0)  # W/Hz
    bandwidth: float = 1e6  # Hz, per user
    carrier_wavelength: float = 0.125  # m (2.4 GHz)
    tx_gain: float = 1.0
    rx_gain: float = 1.0

    def validate(self) -> None:
        for name in ("tx_power", "noise_psd", "bandwidth", "carrier_wavelength", "tx_gain", "rx_gain"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"link budget field {name} must be > 0")

    def received_power(self, d):
        return self.tx_power * self.tx_gain * self.rx_gain * (self.carrier_wavelength / (4 * math.pi * d)) ** 2

    @property
    def noise_power(self) -> float:
        return self.noise_psd * self.bandwidth

    @property
    def snr_at_1m(self) -> float:
        return self.received_power(1.0) / self.noise_power


def friis_rate(d: float, lb: LinkBudget) -> float:
    """Shannon rate in bit/s over a free-space link of length ``d`` meters."""
    if not d > 0:
        raise InvalidDistance(f"distance must be > 0, got {d}")
    return lb.bandwidth * math.log2(1.0 + lb.received_power(d) / lb.noise_power)


def decode_action(index: int, uavs: int) -> tuple[int, ...]:
    """Base-5 digits of ``index``, UAV 0 being the least significant digit."""
    if not 0 <= index < 5**uavs:
        raise ValueError(f"joint action {index} out of range for {uavs} UAVs")
    digits = []
    for _ in range(uavs):
        index, d = divmod(index, 5)
        digits.append(d)
    return tuple(digits)


def encode_action(moves) -> int:
    index = 0
    for d in reversed(tuple(moves)):
        if not 0 <= d < 5:
            raise ValueError(f"move digit {d} not in 0..4")
        index = index * 5 + d
    return index


@dataclass(frozen=True)
class UavEnvState:
    uav_pos: np.ndarray  # (M, 2) m, treated as immutable
    user_pos: np.ndarray  # (U, 2) m
    t: int
    horizon: int

    def to_dict(self) -> dict:
        return {
            "uav_pos": self.uav_pos.tolist(),
            "user_pos": self.user_pos.tolist(),
            "t": self.t,
            "horizon": self.horizon,
        }

    def __eq__(self, other):
        if not isinstance(other, UavEnvState):
            return NotImplemented
        return (
            self.t == other.t
            and self.horizon == other.horizon
            and np.array_equal(self.uav_pos, other.uav_pos)
            and np.array_equal(self.user_pos, other.user_pos)
        )


@dataclass(frozen=True)
class UavConfig:
    arena_width: float = 100.0
    arena_height: float = 100.0
    hangar: tuple[float, float] = (0.0, 0.0)
    uavs: int = 4
    users: int = 10
    horizon: int = 100
    height: float = 5.0
    speed: float = 8.0
    dt: float = 1.0
    link: LinkBudget = field(default_factory=LinkBudget)
    rate_scale: float | None = None  # None: friis_rate(height)
    full_obs: bool = False

    def validate(self) -> None:
        if not (self.arena_width > 0 and self.arena_height > 0):
            raise ConfigError("arena dimensions must be > 0")
        hx, hy = self.hangar
        if not (0 <= hx <= self.arena_width and 0 <= hy <= self.arena_height):
            raise ConfigError("hangar must lie inside the arena")
        if self.uavs < 1 or self.users < 1 or self.horizon < 1:
            raise ConfigError("uavs, users and horizon must be >= 1")
        if not (self.height > 0 and self.speed >= 0 and self.dt > 0):
            raise ConfigError("height and dt must be > 0, speed >= 0")
        if self.rate_scale is not None and not self.rate_scale > 0:
            raise ConfigError("rate_scale must be > 0")
        self.link.validate()

    @property
    def scale(self) -> float:
        return self.rate_scale if self.rate_scale is not None else friis_rate(self.height, self.link)


@numba.njit(cache=True)
def _coverage_rewards(uav_pos, users, snr_1m, bandwidth, height, scale):
    """Reward per row of ``uav_pos`` (m, M, 2)."""
    m, M = uav_pos.shape[0], uav_pos.shape[1]
    U = users.shape[0]
    h2 = height * height
    out = np.empty(m)
    for r in range(m):
        total = 0.0
        for u in range(U):
            best = np.inf
            for j in range(M):
                dx = users[u, 0] - uav_pos[r, j, 0]
                dy = users[u, 1] - uav_pos[r, j, 1]
                d2 = dx * dx + dy * dy
                if d2 < best:
                    best = d2
            total += math.log2(1.0 + snr_1m / (best + h2))
        out[r] = bandwidth * (total / U) / scale
    return out


def uav_reward(state: UavEnvState, lb: LinkBudget, rate_scale: float = 1.0, height: float = 5.0) -> float:
    """Mean over users of the best-UAV rate, divided by ``rate_scale``."""
    pos = np.ascontiguousarray(state.uav_pos, dtype=np.float64)[None]
    users = np.ascontiguousarray(state.user_pos, dtype=np.float64)
    return float(_coverage_rewards(pos, users, lb.snr_at_1m, lb.bandwidth, height, rate_scale)[0])


def draw_users(config: UavConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform((0.0, 0.0), (config.arena_width, config.arena_height), size=(config.users, 2))


def uav_reset(config: UavConfig, user_pos: np.ndarray) -> UavEnvState:
    config.validate()
    pos = np.tile(np.asarray(config.hangar, dtype=np.float64), (config.uavs, 1))
    pos.flags.writeable = False
    return UavEnvState(pos, user_pos, 0, config.horizon)


class UavEnv:
    name = "uav"
    stochastic = False

    def __init__(self, config: UavConfig | None = None, seed: int = 0):
        self.config = config or UavConfig()
        self.config.validate()
        self.seed = seed
        self.rng = RngStream(seed, "env").generator()
        users = draw_users(self.config, self.rng)
        users.flags.writeable = False
        self.users = users
        self.action_count = 5**self.config.uavs
        self.state_count = None
        self.steps_per_episode = self.config.horizon
        self.obs_dim = 2 * self.config.uavs + (2 * self.config.users if self.config.full_obs else 0)
        self._lb = self.config.link
        self._scale = self.config.scale
        self._snr = self._lb.snr_at_1m
        self._bounds = np.array([self.config.arena_width, self.config.arena_height])
        self._moves = self.config.speed * self.config.dt * MOVES[self._digit_table()]
        # placeholder until the first reset: stepping it raises EpisodeOver
        parked = uav_reset(self.config, self.users)
        self.state = UavEnvState(parked.uav_pos, self.users, self.config.horizon, self.config.horizon)

    def _digit_table(self) -> np.ndarray:
        idx = np.arange(self.action_count)
        return np.stack([(idx // 5**m) % 5 for m in range(self.config.uavs)], axis=1)

    def reset(self) -> StateVec:
        self.state = uav_reset(self.config, self.users)
        return self.observe()

    def reward(self) -> float:
        return self._rewards(self.state.uav_pos[None])[0]

    def _rewards(self, pos: np.ndarray) -> np.ndarray:
        return _coverage_rewards(pos, self.users, self._snr, self._lb.bandwidth, self.config.height, self._scale)

    def step(self, action: int):
        s = self.state
        if s.t >= s.horizon:
            raise EpisodeOver("UAV episode reached its horizon")
        pos = np.minimum(np.maximum(s.uav_pos + self._moves[action], 0.0), self._bounds)
        pos.flags.writeable = False
        self.state = UavEnvState(pos, s.user_pos, s.t + 1, s.horizon)
        terminal = self.state.t == s.horizon
        return self.observe(), float(self.reward()), terminal, None

    def observe(self) -> StateVec:
        return StateVec(tuple(self.observe_pos(self.state.uav_pos).tolist()))

    def observe_pos(self, uav_pos: np.ndarray) -> np.ndarray:
        feats = (uav_pos / self._bounds).ravel()
        if self.config.full_obs:
            feats = np.concatenate([feats, (self.users / self._bounds).ravel()])
        return feats

    def full_observation(self) -> StateVec:
        s = self.state
        feats = np.concatenate([(s.uav_pos / self._bounds).ravel(), (s.user_pos / self._bounds).ravel()])
        return StateVec(tuple(feats.tolist()))

    def snapshot(self) -> EnvSnapshot:
        return EnvSnapshot(self.name, self.state, rng_state(self.rng))

    def restore(self, snapshot: EnvSnapshot) -> None:
        self.state = snapshot.state
        set_rng_state(self.rng, snapshot.rng_state)

    def reseed(self, rng: np.random.Generator) -> None:
        self.rng = np.random.Generator(np.random.PCG64(rng.integers(0, 2**63)))

    def replica(self) -> "UavEnv":
        return UavEnv(self.config, self.seed)

    def rollout_batch(self, snapshot: EnvSnapshot, count: int) -> "UavRolloutBatch":
        return UavRolloutBatch(self, snapshot.state, count)


class UavRolloutBatch:
    """``count`` copies of one UAV state stepped together.

    Produces exactly the observations, rewards and terminal flags that
    ``count`` separate ``UavEnv.step`` calls would.
    """

    def __init__(self, env: UavEnv, state: UavEnvState, count: int):
        self.env = env
        self.pos = np.repeat(state.uav_pos[None], count, axis=0)
        self.t = np.full(count, state.t)
        self.horizon = state.horizon
        self.obs = np.stack([env.observe_pos(p) for p in self.pos]) if count else np.zeros((0, env.obs_dim))

    def step(self, rows: np.ndarray, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        env = self.env
        if np.any(self.t[rows] >= self.horizon):
            raise EpisodeOver("UAV episode reached its horizon")
        pos = np.minimum(np.maximum(self.pos[rows] + env._moves[actions], 0.0), env._bounds)
        self.pos[rows] = pos
        self.t[rows] += 1
        for i, r in enumerate(rows):
            self.obs[r] = env.observe_pos(pos[i])
        return env._rewards(pos), self.t[rows] == self.horizon
