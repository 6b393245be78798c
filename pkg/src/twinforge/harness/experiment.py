"""Builds the env/agent/twin/trainer stack from a config and runs seeds."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from ..agents import DqnAgent, EpsilonSchedule, QlAgent
from ..envs import UavEnv, UrllcEnv
from ..errors import NumericError
from ..trainer import Strategy, Trainer
from ..twin import NoiseModel, TwinSpace
from .config import DqnConfig, ExperimentConfig
from .metrics import MetricsTable, SeedResult, moving_average, write_outputs


def build_env(cfg: ExperimentConfig, seed: int):
    if cfg.env == "urllc":
        return UrllcEnv(cfg.env_config, seed)
    return UavEnv(cfg.env_config, seed)


def build_agent(cfg: ExperimentConfig, env, seed: int):
    a = cfg.agent_config
    if cfg.agent == "ql":
        return QlAgent.build(env.state_count, env.action_count, a.alpha, a.gamma, a.init_q)
    return DqnAgent(env.obs_dim, env.action_count, a.hidden, a.lr, a.gamma, a.target_sync, seed)


def divergent_count(cfg: ExperimentConfig) -> int:
    if cfg.twin.domains:
        return cfg.twin.domains
    s = cfg.strategy
    if s.kind is Strategy.MULTIACTION:
        return s.n
    if s.kind is Strategy.PREDICTION:
        return s.trajectories
    return 1


def build_trainer(cfg: ExperimentConfig, seed: int) -> Trainer:
    env = build_env(cfg, seed)
    agent = build_agent(cfg, env, seed)
    a = cfg.agent_config
    schedule = EpsilonSchedule(a.eps_start, a.eps_end, max(a.eps_decay_fraction * cfg.episodes, 1e-9))
    capacity = a.replay_capacity if isinstance(a, DqnConfig) else 50_000
    batch = a.batch_size if isinstance(a, DqnConfig) else 1
    twin = None
    if cfg.strategy.kind is not Strategy.PHYSICAL:
        t = cfg.twin
        twin = TwinSpace(
            env,
            divergent_count(cfg),
            NoiseModel(t.state_noise_std, t.reward_noise_std, t.state_bias),
            seed=seed,
            capacity=capacity,
            replicas=t.replicas,
            mirror=t.mirror,
            audit=t.audit,
        )
    return Trainer(env, agent, schedule, cfg.strategy, twin, seed=seed, batch_size=batch, capacity=capacity)


def run_seed(cfg: ExperimentConfig, seed: int) -> SeedResult:
    res = SeedResult(seed)
    try:
        trainer = build_trainer(cfg, seed)
        for _ in range(cfg.episodes):
            res.rows.append(trainer.run_episode())
    except NumericError as e:
        res.error = f"{e.code}: {e}"
        return res
    res.smoothed = moving_average([m.total_reward for m in res.rows], cfg.window)
    return res


def thread_cap() -> int:
    raw = os.environ.get("TWINFORGE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_seeds(cfg: ExperimentConfig, workers: int | None = None) -> MetricsTable:
    workers = thread_cap() if workers is None else workers
    workers = min(workers, len(cfg.seeds))
    if workers <= 1:
        results = [run_seed(cfg, s) for s in cfg.seeds]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    return MetricsTable(results, cfg.window)


def run_experiment(cfg: ExperimentConfig, output_dir: str | Path | None = None) -> MetricsTable:
    """Run every seed and write ``metrics_seed<SEED>.csv`` files plus ``summary.csv``."""
    if output_dir is not None:
        cfg = replace(cfg, output_dir=str(output_dir))
    table = run_seeds(cfg)
    write_outputs(table, cfg.output_dir)
    return table


def run_grid(cfg: ExperimentConfig, variants: dict[str, list[str]], output_dir: str | Path) -> dict[str, MetricsTable]:
    """Run one experiment per named variant under ``output_dir/<name>``.

    Each variant is a list of ``key=value`` overrides applied to ``cfg``.
    """
    out = {}
    for name, overrides in variants.items():
        vcfg = cfg.with_overrides(*overrides)
        out[name] = run_experiment(vcfg, Path(output_dir) / name)
    return out
