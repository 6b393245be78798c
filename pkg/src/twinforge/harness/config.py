"""Experiment definitions in a line-oriented ``key=value`` format.

Keys are dotted (``env.uav.horizon=100``); blank lines and ``#`` comments are
ignored. Every key, its type and default is listed by ``twinforge run --help``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, replace
from typing import Callable

from ..envs.uav import LinkBudget, UavConfig, dbm_per_hz_to_watts
from ..envs.urllc import DEFAULT_APS, AccessPoint, UrllcConfig
from ..errors import ConfigError, MissingRequired, TypeMismatch, UnknownKey
from ..trainer import Strategy, StrategyConfig


@dataclass(frozen=True)
class QlConfig:
    alpha: float = 0.1
    gamma: float = 0.95
    init_q: float = 0.0
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.6


@dataclass(frozen=True)
class DqnConfig:
    hidden: tuple[int, ...] = (128, 128)
    replay_capacity: int = 50_000
    batch_size: int = 64
    lr: float = 1e-3
    target_sync: int = 500
    gamma: float = 0.95
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_fraction: float = 0.6


@dataclass(frozen=True)
class TwinConfig:
    domains: int = 0  # 0 = max(n, trajectories)
    state_noise_std: float = 0.0
    reward_noise_std: float = 0.0
    state_bias: float = 0.0
    replicas: int = 1
    mirror: bool = True
    audit: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    env: str
    agent: str
    episodes: int
    env_config: UrllcConfig | UavConfig
    agent_config: QlConfig | DqnConfig
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    twin: TwinConfig = field(default_factory=TwinConfig)
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs"
    window: int = 10

    def with_overrides(self, *overrides: str) -> "ExperimentConfig":
        return parse_config(serialize_config(self), overrides=overrides)


# -- value parsers ---------------------------------------------------------


def _int(v: str) -> int:
    return int(v)


def _float(v: str) -> float:
    return float(v)


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ValueError(v)


def _ints(v: str) -> tuple[int, ...]:
    out = tuple(int(x) for x in v.split(",") if x.strip())
    if not out:
        raise ValueError(v)
    return out


def _str(v: str) -> str:
    if not v:
        raise ValueError(v)
    return v


def _choice(*options: str) -> Callable[[str], str]:
    def parse(v: str) -> str:
        if v not in options:
            raise ValueError(v)
        return v

    parse.__name__ = "|".join(options)
    return parse


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    return str(v)


@dataclass(frozen=True)
class Key:
    name: str
    parse: Callable[[str], object]
    default: object
    doc: str


_U, _D = UrllcConfig(), UavConfig()
_Q, _N, _S, _T = QlConfig(), DqnConfig(), StrategyConfig(), TwinConfig()

KEYS: dict[str, Key] = {
    k.name: k
    for k in [
        Key("env", _choice("urllc", "uav"), None, "urllc or uav"),
        Key("agent", _choice("ql", "dqn"), None, "ql or dqn"),
        Key("episodes", _int, None, "physical episodes per seed"),
        Key("seeds", _ints, (0,), "comma-separated 64-bit seeds"),
        Key("output_dir", _str, "runs", "directory for CSV output"),
        Key("window", _int, 10, "moving-average window"),
        Key("env.urllc.road_length", _float, _U.road_length, "m"),
        Key("env.urllc.speed", _float, _U.speed, "m/s"),
        Key("env.urllc.task_size", _float, _U.task_size, "bits"),
        Key("env.urllc.deadline", _float, _U.deadline, "s"),
        Key("env.urllc.w_success", _float, _U.w_success, "reward for a successful transmission"),
        Key("env.urllc.w_lat", _float, _U.w_lat, "penalty per second of latency"),
        Key("env.urllc.w_cost", _float, _U.w_cost, "weight of AP usage cost"),
        Key("env.urllc.bins", _int, _U.bins, "discrete position bins for tabular QL"),
        Key("env.urllc.start_fraction", _float, _U.start_fraction, "start drawn in [0, fraction*road]"),
        Key("env.urllc.full_obs", _bool, _U.full_obs, "observe AP positions too"),
        Key("env.urllc.aps", _int, len(DEFAULT_APS), "number of APs; env.urllc.ap.<i>.{position,radius,rate,cost}"),
        Key("env.uav.arena_width", _float, _D.arena_width, "m"),
        Key("env.uav.arena_height", _float, _D.arena_height, "m"),
        Key("env.uav.hangar_x", _float, _D.hangar[0], "m"),
        Key("env.uav.hangar_y", _float, _D.hangar[1], "m"),
        Key("env.uav.uavs", _int, _D.uavs, "number of UAVs"),
        Key("env.uav.users", _int, _D.users, "number of ground users"),
        Key("env.uav.horizon", _int, _D.horizon, "steps per episode"),
        Key("env.uav.height", _float, _D.height, "m"),
        Key("env.uav.speed", _float, _D.speed, "m/s"),
        Key("env.uav.dt", _float, _D.dt, "s per step"),
        Key("env.uav.tx_power", _float, _D.link.tx_power, "W"),
        Key("env.uav.noise_psd_dbm", _float, -174.0, "dBm/Hz"),
        Key("env.uav.bandwidth", _float, _D.link.bandwidth, "Hz per user"),
        Key("env.uav.wavelength", _float, _D.link.carrier_wavelength, "m"),
        Key("env.uav.tx_gain", _float, _D.link.tx_gain, "linear"),
        Key("env.uav.rx_gain", _float, _D.link.rx_gain, "linear"),
        Key("env.uav.rate_scale", _float, 0.0, "reward divisor in bit/s; 0 = rate at the UAV height"),
        Key("env.uav.full_obs", _bool, _D.full_obs, "observe user positions too"),
        Key("agent.ql.alpha", _float, _Q.alpha, "learning rate"),
        Key("agent.ql.gamma", _float, _Q.gamma, "discount"),
        Key("agent.ql.init_q", _float, _Q.init_q, "initial Q value"),
        Key("agent.ql.eps_start", _float, _Q.eps_start, ""),
        Key("agent.ql.eps_end", _float, _Q.eps_end, ""),
        Key("agent.ql.eps_decay_fraction", _float, _Q.eps_decay_fraction, "of the episode budget"),
        Key("agent.dqn.hidden", _ints, _N.hidden, "hidden layer sizes"),
        Key("agent.dqn.replay_capacity", _int, _N.replay_capacity, "transitions per buffer"),
        Key("agent.dqn.batch_size", _int, _N.batch_size, ""),
        Key("agent.dqn.lr", _float, _N.lr, "Adam step size"),
        Key("agent.dqn.target_sync", _int, _N.target_sync, "updates between target-net copies"),
        Key("agent.dqn.gamma", _float, _N.gamma, "discount"),
        Key("agent.dqn.eps_start", _float, _N.eps_start, ""),
        Key("agent.dqn.eps_end", _float, _N.eps_end, ""),
        Key("agent.dqn.eps_decay_fraction", _float, _N.eps_decay_fraction, "of the episode budget"),
        Key("strategy.kind", _choice("physical", "multiaction", "prediction"), _S.kind.value, ""),
        Key("strategy.n", _int, _S.n, "actions tried per state (multiaction)"),
        Key("strategy.k", _int, _S.k, "prediction depth (prediction)"),
        Key("strategy.trajectories", _int, _S.trajectories, "rollouts averaged per target"),
        Key("strategy.sample_mix", _float, _S.sample_mix, "twin share of DQN minibatches"),
        Key("strategy.include_taken", _bool, _S.include_taken, "fanout re-runs the taken action"),
        Key("strategy.dt_warmup_episodes", _int, _S.dt_warmup_episodes, "physical-only episodes first"),
        Key("twin.domains", _int, _T.domains, "divergent domains; 0 = max(n, trajectories)"),
        Key("twin.state_noise_std", _float, _T.state_noise_std, "feature units"),
        Key("twin.reward_noise_std", _float, _T.reward_noise_std, "reward units"),
        Key("twin.state_bias", _float, _T.state_bias, "additive next-state offset"),
        Key("twin.replicas", _int, _T.replicas, "noisy replicas averaged per fanout action"),
        Key("twin.mirror", _bool, _T.mirror, "run the identical mirror domain"),
        Key("twin.audit", _bool, _T.audit, "check twin params after every sync"),
    ]
}

_AP_KEY = re.compile(r"^env\.urllc\.ap\.(\d+)\.(position|radius|rate|cost)$")
_AP_FIELDS = {"position": "position", "radius": "radius", "rate": "rate", "cost": "cost_per_second"}


def help_text() -> str:
    lines = []
    for k in KEYS.values():
        default = "(required)" if k.default is None else _fmt(k.default)
        lines.append(f"  {k.name} = {default}" + (f"    # {k.doc}" if k.doc else ""))
    return "\n".join(lines)


def _read(text: str, origin: str = "line") -> list[tuple[int, str, str]]:
    out = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", n)
        key, value = line.split("=", 1)
        out.append((n, key.strip(), value.strip()))
    return out


def parse_config(text: str, overrides=()) -> ExperimentConfig:
    """Parse and validate an experiment definition.

    ``overrides`` are extra ``key=value`` strings applied after the file;
    their errors report line numbers past the end of the file.
    """
    entries = _read(text)
    base = len(text.splitlines())
    seen: dict[str, int] = {}
    values: dict[str, object] = {}
    aps: dict[int, dict[str, tuple[float, int]]] = {}
    for i, ov in enumerate(overrides, start=1):
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} is not key=value", base + i)
        key, value = ov.split("=", 1)
        entries.append((base + i, key.strip(), value.strip()))
    n_file = len(_read(text))
    for idx, (line, key, raw) in enumerate(entries):
        from_override = idx >= n_file
        if key in seen and not from_override:
            raise ConfigError(f"duplicate key {key!r} (first on line {seen[key]})", line)
        seen[key] = line
        m = _AP_KEY.match(key)
        if m:
            try:
                aps.setdefault(int(m.group(1)), {})[_AP_FIELDS[m.group(2)]] = (float(raw), line)
            except ValueError:
                raise TypeMismatch(f"{key} expects a float, got {raw!r}", line) from None
            continue
        entry = KEYS.get(key)
        if entry is None:
            raise UnknownKey(f"unknown key {key!r}", line)
        try:
            values[key] = entry.parse(raw)
        except (ValueError, TypeError):
            kind = getattr(entry.parse, "__name__", "value").lstrip("_")
            raise TypeMismatch(f"{key} expects {kind}, got {raw!r}", line) from None

    for req in ("env", "agent", "episodes"):
        if req not in values:
            raise MissingRequired(f"missing required key {req!r}", base + len(overrides) + 1)

    def get(key):
        return values.get(key, KEYS[key].default)

    env, agent = get("env"), get("agent")
    for key, line in seen.items():
        for section, chosen in (("env.", env), ("agent.", agent)):
            if key.startswith(section) and not key.startswith(f"{section}{chosen}."):
                raise ConfigError(f"key {key!r} does not apply to {section[:-1]}={chosen}", line)

    if env == "urllc":
        env_config = _urllc(get, aps)
    else:
        env_config = _uav(get)
    if agent == "ql":
        agent_config = QlConfig(**{f.name: get(f"agent.ql.{f.name}") for f in fields(QlConfig)})
        if env != "urllc":
            raise ConfigError("agent=ql needs a discrete-state environment (env=urllc)", seen["agent"])
    else:
        agent_config = DqnConfig(**{f.name: get(f"agent.dqn.{f.name}") for f in fields(DqnConfig)})

    strategy = StrategyConfig(
        kind=Strategy(get("strategy.kind")),
        n=get("strategy.n"),
        k=get("strategy.k"),
        trajectories=get("strategy.trajectories"),
        sample_mix=get("strategy.sample_mix"),
        include_taken=get("strategy.include_taken"),
        dt_warmup_episodes=get("strategy.dt_warmup_episodes"),
    )
    twin = TwinConfig(**{f.name: get(f"twin.{f.name}") for f in fields(TwinConfig)})
    cfg = ExperimentConfig(
        env=env,
        agent=agent,
        episodes=get("episodes"),
        env_config=env_config,
        agent_config=agent_config,
        strategy=strategy,
        twin=twin,
        seeds=get("seeds"),
        output_dir=get("output_dir"),
        window=get("window"),
    )
    validate(cfg, seen)
    return cfg


def _urllc(get, aps) -> UrllcConfig:
    count = get("env.urllc.aps")
    if count < 1:
        raise ConfigError("env.urllc.aps must be >= 1")
    out = []
    for i in range(count):
        given = aps.pop(i, {})
        if i < len(DEFAULT_APS):
            ap = replace(DEFAULT_APS[i], **{f: v for f, (v, _) in given.items()})
        else:
            missing = [f for f in _AP_FIELDS.values() if f not in given]
            if missing:
                raise MissingRequired(f"access point {i} needs {', '.join(missing)}")
            ap = AccessPoint(**{f: v for f, (v, _) in given.items()})
        out.append(ap)
    if aps:
        i = min(aps)
        line = min(line for _, line in aps[i].values())
        raise ConfigError(f"access point {i} is beyond env.urllc.aps={count}", line)
    return UrllcConfig(
        road_length=get("env.urllc.road_length"),
        speed=get("env.urllc.speed"),
        aps=tuple(out),
        task_size=get("env.urllc.task_size"),
        deadline=get("env.urllc.deadline"),
        w_success=get("env.urllc.w_success"),
        w_lat=get("env.urllc.w_lat"),
        w_cost=get("env.urllc.w_cost"),
        bins=get("env.urllc.bins"),
        start_fraction=get("env.urllc.start_fraction"),
        full_obs=get("env.urllc.full_obs"),
    )


def _uav(get) -> UavConfig:
    link = LinkBudget(
        tx_power=get("env.uav.tx_power"),
        noise_psd=dbm_per_hz_to_watts(get("env.uav.noise_psd_dbm")),
        bandwidth=get("env.uav.bandwidth"),
        carrier_wavelength=get("env.uav.wavelength"),
        tx_gain=get("env.uav.tx_gain"),
        rx_gain=get("env.uav.rx_gain"),
    )
    scale = get("env.uav.rate_scale")
    return UavConfig(
        arena_width=get("env.uav.arena_width"),
        arena_height=get("env.uav.arena_height"),
        hangar=(get("env.uav.hangar_x"), get("env.uav.hangar_y")),
        uavs=get("env.uav.uavs"),
        users=get("env.uav.users"),
        horizon=get("env.uav.horizon"),
        height=get("env.uav.height"),
        speed=get("env.uav.speed"),
        dt=get("env.uav.dt"),
        link=link,
        rate_scale=scale if scale > 0 else None,
        full_obs=get("env.uav.full_obs"),
    )


def validate(cfg: ExperimentConfig, lines: dict[str, int] | None = None) -> None:
    lines = lines or {}
    if cfg.episodes < 1:
        raise ConfigError("episodes must be >= 1", lines.get("episodes"))
    if not cfg.seeds:
        raise ConfigError("seeds must be non-empty", lines.get("seeds"))
    for s in cfg.seeds:
        if not 0 <= s < 2**64:
            raise ConfigError(f"seed {s} is not a 64-bit unsigned integer", lines.get("seeds"))
    if cfg.window < 1:
        raise ConfigError("window must be >= 1", lines.get("window"))
    cfg.env_config.validate()
    try:
        cfg.strategy.validate()
    except ConfigError as e:
        raise ConfigError(str(e), lines.get("strategy.kind")) from None
    if cfg.twin.replicas < 1 or cfg.twin.domains < 0:
        raise ConfigError("twin.replicas must be >= 1 and twin.domains >= 0")


def serialize_config(cfg: ExperimentConfig) -> str:
    """Full ``key=value`` text that parses back to an equal config."""
    out = [
        f"env={cfg.env}",
        f"agent={cfg.agent}",
        f"episodes={cfg.episodes}",
        f"seeds={_fmt(cfg.seeds)}",
        f"output_dir={cfg.output_dir}",
        f"window={cfg.window}",
    ]
    e = cfg.env_config
    if cfg.env == "urllc":
        for name in ("road_length", "speed", "task_size", "deadline", "w_success", "w_lat", "w_cost",
                     "bins", "start_fraction", "full_obs"):
            out.append(f"env.urllc.{name}={_fmt(getattr(e, name))}")
        out.append(f"env.urllc.aps={len(e.aps)}")
        for i, ap in enumerate(e.aps):
            for key, attr in _AP_FIELDS.items():
                out.append(f"env.urllc.ap.{i}.{key}={_fmt(float(getattr(ap, attr)))}")
    else:
        lb = e.link
        pairs = {
            "arena_width": e.arena_width, "arena_height": e.arena_height,
            "hangar_x": float(e.hangar[0]), "hangar_y": float(e.hangar[1]),
            "uavs": e.uavs, "users": e.users, "horizon": e.horizon, "height": e.height,
            "speed": e.speed, "dt": e.dt, "tx_power": lb.tx_power,
            "bandwidth": lb.bandwidth, "wavelength": lb.carrier_wavelength,
            "tx_gain": lb.tx_gain, "rx_gain": lb.rx_gain,
            "rate_scale": e.rate_scale or 0.0, "full_obs": e.full_obs,
        }
        for name, v in pairs.items():
            out.append(f"env.uav.{name}={_fmt(v)}")
        out.append(f"env.uav.noise_psd_dbm={_fmt(_noise_dbm(lb.noise_psd))}")
    section = "ql" if cfg.agent == "ql" else "dqn"
    for f in fields(cfg.agent_config):
        out.append(f"agent.{section}.{f.name}={_fmt(getattr(cfg.agent_config, f.name))}")
    s = cfg.strategy
    out += [
        f"strategy.kind={s.kind.value}",
        f"strategy.n={s.n}",
        f"strategy.k={s.k}",
        f"strategy.trajectories={s.trajectories}",
        f"strategy.sample_mix={_fmt(s.sample_mix)}",
        f"strategy.include_taken={_fmt(s.include_taken)}",
        f"strategy.dt_warmup_episodes={s.dt_warmup_episodes}",
    ]
    for f in fields(cfg.twin):
        out.append(f"twin.{f.name}={_fmt(getattr(cfg.twin, f.name))}")
    return "\n".join(out) + "\n"


def _noise_dbm(watts_per_hz: float) -> float:
    import math

    dbm = 10.0 * math.log10(watts_per_hz * 1e3)
    # keep the configured value when the round trip is exact
    nearest = round(dbm, 9)
    return nearest if dbm_per_hz_to_watts(nearest) == watts_per_hz else dbm


def load_config(path, overrides=()) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read(), overrides)
