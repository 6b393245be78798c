"""Training loops: physical baseline, multi-action fanout, prediction targets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .agents.dqn import DqnAgent
from .agents.replay import ReplayBuffer
from .agents.tabular import EpsilonSchedule, QlAgent
from .core import Kind, RngStream, Transition
from .envs.base import Environment
from .errors import ConfigError
from .twin import TwinSpace


class Strategy(str, Enum):
    PHYSICAL = "physical"
    MULTIACTION = "multiaction"
    PREDICTION = "prediction"


@dataclass(frozen=True)
class StrategyConfig:
    kind: Strategy = Strategy.PHYSICAL
    n: int = 1  # actions evaluated per state (MULTIACTION)
    k: int = 1  # prediction depth (PREDICTION)
    trajectories: int = 4
    sample_mix: float = 0.5  # twin share of each DQN minibatch
    include_taken: bool = True  # fanout re-runs the physically taken action
    dt_warmup_episodes: int = 0

    def validate(self) -> None:
        if self.kind is Strategy.MULTIACTION and self.n < 2:
            raise ConfigError("multiaction strategy needs n >= 2")
        if self.kind is Strategy.PREDICTION and (self.k < 1 or self.trajectories < 1):
            raise ConfigError("prediction strategy needs k >= 1 and trajectories >= 1")
        if not 0.0 <= self.sample_mix <= 1.0:
            raise ConfigError("sample_mix must be in [0, 1]")
        if self.dt_warmup_episodes < 0:
            raise ConfigError("dt_warmup_episodes must be >= 0")


@dataclass
class EpisodeMetrics:
    episode: int
    total_reward: float
    epsilon: float
    loss_mean: float = math.nan
    transitions_generated: dict[Kind, int] = field(default_factory=lambda: {k: 0 for k in Kind})
    twin_stored: int = 0

    @property
    def phys_transitions(self) -> int:
        return self.transitions_generated[Kind.PHYSICAL]

    @property
    def twin_transitions(self) -> int:
        g = self.transitions_generated
        return g[Kind.TWIN_FANOUT] + g[Kind.TWIN_ROLLOUT]


class Trainer:
    """Runs episodes of one agent in one physical environment.

    The physical trajectory only depends on the ``env`` and ``agent-explore``
    streams; all twin randomness comes from separate streams, so strategies
    compared at one seed see the same environment luck.
    """

    def __init__(
        self,
        env: Environment,
        agent: QlAgent | DqnAgent,
        schedule: EpsilonSchedule,
        strategy: StrategyConfig,
        twin: TwinSpace | None = None,
        seed: int = 0,
        batch_size: int = 64,
        capacity: int = 50_000,
    ):
        strategy.validate()
        if strategy.kind is not Strategy.PHYSICAL and twin is None:
            raise ConfigError(f"strategy {strategy.kind.value} needs a twin space")
        if strategy.n > env.action_count:
            raise ConfigError(f"n={strategy.n} exceeds the {env.action_count} available actions")
        self.env = env
        self.agent = agent
        self.schedule = schedule
        self.strategy = strategy
        self.twin = twin
        self.batch_size = batch_size
        self.buffer = ReplayBuffer(capacity, env.obs_dim)
        self.explore_rng = RngStream(seed, "agent-explore").generator()
        self.replay_rng = RngStream(seed, "replay").generator()
        self.fanout_rng = RngStream(seed, "fanout").generator()
        self.progress = 0.0
        self.episode = 0
        self.tabular = isinstance(agent, QlAgent)
        self._sync_twin(target_changed=True)

    # public episode runners -----------------------------------------
    def run_episode(self) -> EpisodeMetrics:
        s = self.strategy
        if self.episode < s.dt_warmup_episodes or s.kind is Strategy.PHYSICAL:
            return self.run_episode_physical()
        if s.kind is Strategy.MULTIACTION:
            return self.run_episode_multiaction(s.n)
        return self.run_episode_prediction(s.k, s.trajectories)

    def run_episode_physical(self) -> EpisodeMetrics:
        return self._episode(Strategy.PHYSICAL)

    def run_episode_multiaction(self, n: int) -> EpisodeMetrics:
        if not 1 <= n <= self.env.action_count:
            raise ConfigError(f"n must be in 1..{self.env.action_count}")
        return self._episode(Strategy.MULTIACTION, n=n)

    def run_episode_prediction(self, k: int, trajectories: int) -> EpisodeMetrics:
        return self._episode(Strategy.PREDICTION, k=k, trajectories=trajectories)

    def epsilon(self) -> float:
        return self.schedule.value(self.progress)

    # internals -----------------------------------------------------------
    def _episode(self, mode: Strategy, n: int = 1, k: int = 1, trajectories: int = 1) -> EpisodeMetrics:
        env, twin = self.env, self.twin
        m = EpisodeMetrics(self.episode, 0.0, self.epsilon())
        gen = m.transitions_generated
        losses: list[float] = []
        rewards: list[float] = []
        obs = env.reset()
        if twin is not None:
            twin.reset(obs)
        gamma = self.agent.discount
        while True:
            eps = self.epsilon()
            pre = env.snapshot() if mode is Strategy.MULTIACTION else None
            a = self.agent.act(obs, eps, self.explore_rng)
            ns, r, term, _ = env.step(a)
            t = Transition(obs, a, r, ns, term)
            gen[Kind.PHYSICAL] += 1
            rewards.append(r)
            if twin is not None:
                twin.mirror(t)

            if mode is Strategy.PREDICTION:
                stats = {"rollout_steps": 0}
                y = twin.predict(r, env.snapshot(), k, trajectories, gamma, eps, term, stats)
                gen[Kind.TWIN_ROLLOUT] += stats["rollout_steps"]
                self.buffer.add(t, y)
                learn = [(t, y)]
            elif mode is Strategy.MULTIACTION:
                self.buffer.add(t)
                fan = twin.fanout(pre, self._fanout_actions(obs, a, n))
                gen[Kind.TWIN_FANOUT] += len(fan)
                m.twin_stored += len(fan)
                learn = [(f, None) for f in fan]
                if not self.strategy.include_taken:
                    learn.insert(0, (t, None))
            else:
                self.buffer.add(t)
                learn = [(t, None)]

            loss = self._learn(learn, twin_mix=mode is Strategy.MULTIACTION)
            if loss is not None:
                losses.append(loss)
            obs = ns
            if term:
                break
        m.total_reward = math.fsum(rewards)
        if losses:
            m.loss_mean = float(np.mean(losses))
        self.episode += 1
        return m

    def _fanout_actions(self, obs, taken: int, n: int) -> list[int]:
        budget = n - 1
        others = [b for b in range(self.env.action_count) if b != taken]
        if self.tabular:
            visits = self.agent.visits[obs.discrete_id]
            others.sort(key=lambda b: (visits[b], b))
            picked = others[:budget]
        else:
            picked = [int(b) for b in self.fanout_rng.choice(others, size=budget, replace=False)] if budget else []
        return ([taken] if self.strategy.include_taken else []) + picked

    def _learn(self, items, twin_mix: bool) -> float | None:
        spe = self.env.steps_per_episode
        if self.tabular:
            for tr, y in items:
                self.agent.learn(tr, y)
            self.progress += len(items) / spe
            self._sync_twin()
            return None
        self.progress += len(items) / spe
        if len(self.buffer) < self.batch_size:
            return None
        loss = self._dqn_update(twin_mix)
        return loss

    def _dqn_update(self, twin_mix: bool) -> float:
        B = self.batch_size
        n_twin = 0
        if twin_mix and self.twin is not None and self.twin.twin_size() > 0:
            n_twin = int(round(self.strategy.sample_mix * B))
        parts = [(self.buffer, self.buffer.sample(B - n_twin, self.replay_rng))]
        if n_twin:
            bufs = self.twin.twin_buffers()
            sizes = np.array([len(b) for b in bufs])
            flat = self.replay_rng.integers(0, sizes.sum(), size=n_twin)
            edges = np.cumsum(sizes)
            which = np.searchsorted(edges, flat, side="right")
            starts = edges - sizes
            for bi, buf in enumerate(bufs):
                sel = flat[which == bi] - starts[bi]
                if sel.size:
                    parts.append((buf, sel))
        X = np.concatenate([b.states[i] for b, i in parts])
        acts = np.concatenate([b.actions[i] for b, i in parts])
        y = np.concatenate([b.targets[i] for b, i in parts])
        missing = np.isnan(y)
        if missing.any():
            rew = np.concatenate([b.rewards[i] for b, i in parts])[missing]
            nxt = np.concatenate([b.next_states[i] for b, i in parts])[missing]
            term = np.concatenate([b.terminals[i] for b, i in parts])[missing]
            y[missing] = self.agent.targets_for(rew, nxt, term)
        version = self.agent.target_version
        loss = self.agent.update(X, acts, y)
        self._sync_twin(self.agent.target_version != version, self.agent.optimizer.last_cols)
        return loss

    def _sync_twin(self, target_changed: bool = False, touched_cols=None) -> None:
        if self.twin is None:
            return
        if self.tabular:
            self.twin.sync(self.agent.params())
        else:
            self.twin.sync_dqn(self.agent.online, self.agent.target, target_changed, touched_cols)
