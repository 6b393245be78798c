"""Digital space: one identical mirror domain plus divergent domains.

Divergent domains are replicas of the physical environment that get
restored from physical snapshots to try alternative actions (fanout) or to
roll the twin policy forward (prediction). Each domain owns its replica and
its transition buffer; the collection of buffers is the storage space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .agents.dqn import DqnParams
from .agents.mlp import MlpParams, mlp_forward
from .agents.params import AgentParams, copy_params, params_equal
from .agents.replay import ReplayBuffer
from .agents.tabular import QTable
from .core import (
    AGGREGATE_DOMAIN,
    IDENTICAL_DOMAIN,
    DomainId,
    Kind,
    RngStream,
    Role,
    StateVec,
    Transition,
    divergent_domain,
    transition_average,
)
from .envs.base import EnvSnapshot, Environment
from .errors import EmptyGroup, MirrorDivergence


@dataclass(frozen=True)
class NoiseModel:
    """Additive Gaussian noise on twin-generated data.

    Scalars apply to every feature; tuples give per-feature values.
    """

    state_noise_std: float | tuple[float, ...] = 0.0
    reward_noise_std: float = 0.0
    bias: float | tuple[float, ...] = 0.0

    def __post_init__(self):
        if np.any(np.asarray(self.state_noise_std) < 0) or self.reward_noise_std < 0:
            raise ValueError("noise standard deviations must be >= 0")
        zero = (
            not np.any(np.asarray(self.state_noise_std))
            and self.reward_noise_std == 0
            and not np.any(np.asarray(self.bias))
        )
        object.__setattr__(self, "_zero", bool(zero))

    @property
    def is_zero(self) -> bool:
        return self._zero


ZERO_NOISE = NoiseModel()


def perturb(values: np.ndarray, reward: float, noise: NoiseModel, rng: np.random.Generator):
    """Noisy copy of a next-state vector and reward (state draws first)."""
    n = values.shape[0]
    std = np.broadcast_to(np.asarray(noise.state_noise_std, dtype=np.float64), (n,))
    bias = np.broadcast_to(np.asarray(noise.bias, dtype=np.float64), (n,))
    ns = values + bias + rng.normal(0.0, std)
    return ns, reward + float(rng.normal(0.0, noise.reward_noise_std))


def apply_noise(t: Transition, noise: NoiseModel, rng: np.random.Generator) -> Transition:
    """Perturb ``next_state`` features and reward; state and action are untouched."""
    if noise.is_zero:
        return t
    ns, reward = perturb(np.asarray(t.next_state.values, dtype=np.float64), t.reward, noise, rng)
    return Transition(
        t.state,
        t.action,
        reward,
        StateVec(tuple(ns.tolist()), t.next_state.discrete_id),
        t.terminal,
        t.domain,
        t.kind,
    )


@dataclass
class DigitalDomain:
    id: DomainId
    env: Environment
    noise: NoiseModel
    buffer: ReplayBuffer
    twin_params: AgentParams | None = None

    @property
    def role(self) -> Role:
        return self.id.role


def sync_identical(physical_transition: Transition, domain: DigitalDomain) -> None:
    """Replay the physical step in the mirror domain and demand bit-exact agreement."""
    if domain.role is not Role.IDENTICAL:
        raise ValueError("sync_identical needs the IDENTICAL domain")
    t = physical_transition
    pre = domain.env.observe()
    if pre != t.state:
        raise MirrorDivergence(f"mirror pre-state {pre} != physical {t.state}")
    ns, r, term, _ = domain.env.step(t.action)
    if ns != t.next_state or r != t.reward or term != t.terminal:
        raise MirrorDivergence(
            f"mirror step ({ns}, {r!r}, {term}) != physical ({t.next_state}, {t.reward!r}, {t.terminal})"
        )
    domain.buffer.add(t)


def fanout_trials(
    snapshot: EnvSnapshot,
    actions: Sequence[int],
    domains: Sequence[DigitalDomain],
    rng: np.random.Generator,
    replicas: int = 1,
) -> list[Transition]:
    """Try each action once from ``snapshot``, in ascending action order.

    Domains are reused round-robin by restoring the snapshot. With
    ``replicas > 1`` every action is run in that many domains and the noisy
    outcomes are averaged.
    """
    acts = sorted(int(a) for a in actions)
    if not acts:
        raise EmptyGroup("fanout needs at least one action")
    if len(set(acts)) != len(acts):
        raise ValueError(f"fanout actions must be distinct, got {acts}")
    if not domains:
        raise ValueError("fanout needs at least one divergent domain")
    action_count = domains[0].env.action_count
    if len(acts) > action_count or acts[0] < 0 or acts[-1] >= action_count:
        raise ValueError(f"cannot fan out {len(acts)} distinct actions over {action_count} actions")
    out = []
    slot = 0
    for a in acts:
        group = []
        for _ in range(replicas):
            dom = domains[slot % len(domains)]
            slot += 1
            dom.env.restore(snapshot)
            s = dom.env.observe()
            ns, r, term, _ = dom.env.step(a)
            t = Transition(s, a, r, ns, term, dom.id, Kind.TWIN_FANOUT)
            group.append(apply_noise(t, dom.noise, rng))
        out.append(group[0] if replicas == 1 else transition_average(group))
    return out


def _inputs(states) -> np.ndarray:
    if isinstance(states, np.ndarray):
        return states
    return np.array([s.values for s in states], dtype=np.float64)


def action_values(params: AgentParams, states) -> np.ndarray:
    """Online action values, one row per state (StateVecs or a 2-D array)."""
    if isinstance(params, QTable):
        return params.values[[s.discrete_id for s in states]]
    net = params.online if isinstance(params, DqnParams) else params
    return mlp_forward(net, _inputs(states))


def bootstrap_values(params: AgentParams, states) -> np.ndarray:
    """``max_a Q(s, a)`` for bootstrapping; DQN uses its target network."""
    if isinstance(params, QTable):
        return params.values[[s.discrete_id for s in states]].max(axis=1)
    net = params.target if isinstance(params, DqnParams) else params
    return mlp_forward(net, _inputs(states)).max(axis=1)


class _DomainGroup:
    """Rollouts stepped one replica at a time (any environment)."""

    def __init__(self, domains: Sequence[DigitalDomain], snapshot: EnvSnapshot, rng: np.random.Generator):
        self.domains = domains
        self.states = []
        for d in domains:
            d.env.restore(snapshot)
            if d.env.stochastic:
                d.env.reseed(rng)
            self.states.append(d.env.observe())

    def observations(self, rows):
        return [self.states[r] for r in rows]

    def step(self, rows, actions, rng):
        rewards = np.empty(len(rows))
        terms = np.empty(len(rows), dtype=bool)
        for i, r in enumerate(rows):
            dom = self.domains[r]
            ns, rew, term, _ = dom.env.step(int(actions[i]))
            if not dom.noise.is_zero:
                vals, rew = perturb(np.asarray(ns.values, dtype=np.float64), rew, dom.noise, rng)
                ns = StateVec(tuple(vals.tolist()), ns.discrete_id)
            self.states[r] = ns
            rewards[i], terms[i] = rew, term
        return rewards, terms


class _BatchGroup:
    """Rollouts stepped together through the environment's batch interface."""

    def __init__(self, domains: Sequence[DigitalDomain], snapshot: EnvSnapshot):
        self.domains = domains
        self.batch = domains[0].env.rollout_batch(snapshot, len(domains))

    def observations(self, rows):
        return self.batch.obs[rows]

    def step(self, rows, actions, rng):
        rewards, terms = self.batch.step(np.asarray(rows), np.asarray(actions))
        for i, r in enumerate(rows):
            noise = self.domains[r].noise
            if not noise.is_zero:
                self.batch.obs[r], rewards[i] = perturb(self.batch.obs[r], float(rewards[i]), noise, rng)
        return rewards, terms


def _group(domains, snapshot, rng):
    env = domains[0].env
    if not env.stochastic and hasattr(env, "rollout_batch"):
        return _BatchGroup(domains, snapshot)
    return _DomainGroup(domains, snapshot, rng)


def predict_target(
    first_reward: float,
    post_snapshot: EnvSnapshot,
    params: AgentParams,
    k: int,
    trajectories: int,
    gamma: float,
    rng: np.random.Generator,
    domains: Sequence[DigitalDomain],
    epsilon: float = 0.0,
    first_terminal: bool = False,
    stats: dict | None = None,
) -> float:
    """Trajectory-averaged k-step TD target.

    Each of ``trajectories`` rollouts starts from the state reached by the
    first (physical) action and follows the epsilon-greedy twin policy for
    ``k - 1`` more steps; its return is
    ``r_0 + sum_i gamma^i r_i + gamma^k max_a Q(s_k, a)``, with the bootstrap
    dropped if the episode ends early. The mean over rollouts is returned.
    Replicas of stochastic environments are reseeded per rollout so they
    sample distinct futures. Rollouts run in lockstep, ``len(domains)`` at a
    time, with one batched value lookup per depth.
    """
    if k < 1 or trajectories < 1:
        raise ValueError("k and trajectories must be >= 1")
    if not 0 < gamma <= 1:
        raise ValueError("gamma must be in (0, 1]")
    if first_terminal:
        return float(first_reward)
    if k == 1:
        dom = domains[0]
        dom.env.restore(post_snapshot)
        return float(first_reward + gamma * bootstrap_values(params, [dom.env.observe()])[0])

    returns = np.full(trajectories, float(first_reward))
    width = len(domains)
    for start in range(0, trajectories, width):
        m = min(width, trajectories - start)
        group = _group(domains[:m], post_snapshot, rng)
        live = list(range(m))
        disc = gamma
        for _ in range(k - 1):
            q = action_values(params, group.observations(live))
            explore = rng.random(len(live)) < epsilon
            random_actions = rng.integers(0, q.shape[1], size=len(live))
            actions = np.where(explore, random_actions, q.argmax(axis=1))
            rewards, terms = group.step(live, actions, rng)
            if stats is not None:
                stats["rollout_steps"] = stats.get("rollout_steps", 0) + len(live)
            returns[[start + r for r in live]] += disc * rewards
            live = [r for r, t in zip(live, terms) if not t]
            disc *= gamma
            if not live:
                break
        if live:
            returns[[start + r for r in live]] += disc * bootstrap_values(params, group.observations(live))
    return float(returns.mean())


@numba.njit(cache=True)
def _copy_touched(src, dst, offset, rows, cols, touched):
    """Copy the hidden prefix and the touched output columns of a flat MLP vector."""
    for i in range(offset):
        dst[i] = src[i]
    bias = offset + rows * cols
    for j in range(touched.shape[0]):
        c = touched[j]
        for r in range(rows):
            dst[offset + r * cols + c] = src[offset + r * cols + c]
        dst[bias + c] = src[bias + c]


class TwinSpace:
    """Owns the digital domains, their buffers and the twin agent parameters."""

    def __init__(
        self,
        env: Environment,
        divergent: int,
        noise: NoiseModel = ZERO_NOISE,
        seed: int = 0,
        capacity: int = 50_000,
        replicas: int = 1,
        mirror: bool = True,
        audit: bool = False,
    ):
        if divergent < 1:
            raise ValueError("need at least one divergent domain")
        dim = env.obs_dim
        self.identical = DigitalDomain(IDENTICAL_DOMAIN, env.replica(), ZERO_NOISE, ReplayBuffer(capacity, dim))
        self.divergent = [
            DigitalDomain(divergent_domain(i), env.replica(), noise, ReplayBuffer(capacity, dim))
            for i in range(divergent)
        ]
        self.aggregate = ReplayBuffer(capacity, dim)
        self.replicas = replicas
        self.mirror_enabled = mirror
        self.audit = audit
        self.noise_rng = RngStream(seed, "noise").generator()
        self.rollout_rng = RngStream(seed, "rollout").generator()
        self.twin_params: AgentParams | None = None
        self.divergences = 0
        self._by_id = {d.id.id: d for d in self.divergent}

    # identical domain -------------------------------------------------
    def reset(self, physical_obs: StateVec) -> None:
        if not self.mirror_enabled:
            return
        obs = self.identical.env.reset()
        if obs != physical_obs:
            self.divergences += 1
            raise MirrorDivergence(f"mirror reset {obs} != physical {physical_obs}")

    def mirror(self, t: Transition) -> None:
        if not self.mirror_enabled:
            return
        try:
            sync_identical(t, self.identical)
        except MirrorDivergence:
            self.divergences += 1
            raise

    def global_observation(self) -> StateVec:
        """Full-state view of the physical space, read from the mirror."""
        return self.identical.env.full_observation()

    # divergent domains ------------------------------------------------
    def fanout(self, snapshot: EnvSnapshot, actions: Sequence[int]) -> list[Transition]:
        out = fanout_trials(snapshot, actions, self.divergent, self.noise_rng, self.replicas)
        for t in out:
            buf = self.aggregate if t.domain == AGGREGATE_DOMAIN else self._by_id[t.domain.id].buffer
            buf.add(t)
        return out

    def predict(
        self, first_reward, post_snapshot, k, trajectories, gamma, epsilon, first_terminal=False, stats=None
    ) -> float:
        return predict_target(
            first_reward,
            post_snapshot,
            self.twin_params,
            k,
            trajectories,
            gamma,
            self.rollout_rng,
            self.divergent,
            epsilon,
            first_terminal,
            stats,
        )

    def twin_buffers(self) -> list[ReplayBuffer]:
        return [d.buffer for d in self.divergent] + [self.aggregate]

    def twin_size(self) -> int:
        return sum(len(b) for b in self.twin_buffers())

    # parameters -------------------------------------------------------
    def sync(self, physical: AgentParams) -> None:
        """Copy physical parameters into every domain's twin agent."""
        self.twin_params = copy_params(physical)
        self.identical.twin_params = self.twin_params
        for d in self.divergent:
            d.twin_params = self.twin_params
        if self.audit:
            for d in [self.identical, *self.divergent]:
                if not params_equal(d.twin_params, physical):
                    raise MirrorDivergence(f"twin params of domain {d.id.id} differ after sync")

    def sync_dqn(self, online: MlpParams, target: MlpParams, target_changed: bool, touched_cols=None) -> None:
        """DQN fast path for ``sync``.

        The target copy is reused until the target net changes. When the
        caller names the output columns its last update touched, only the
        hidden prefix and those columns are copied into the existing twin
        online net; the result equals a full copy.
        """
        twin = self.twin_params
        if twin is None or target_changed:
            tgt = target.copy()
        else:
            tgt = twin.target
        if twin is not None and touched_cols is not None and twin.online.sizes == online.sizes:
            tw = twin.online
            _copy_touched(online.flat, tw.flat, online.output_offset, online.sizes[-2], online.sizes[-1],
                          np.asarray(touched_cols, dtype=np.int64))
            self.twin_params = DqnParams(tw, tgt)
        else:
            self.twin_params = DqnParams(online.copy(), tgt)
        for d in [self.identical, *self.divergent]:
            d.twin_params = self.twin_params
        if self.audit and not params_equal(self.twin_params, DqnParams(online, target)):
            raise MirrorDivergence("twin params differ after sync")
