"""Shared vocabulary: states, transitions, domain ids and seeded RNG streams.

Actions are plain ``int`` indices throughout the package.
"""

from __future__ import annotations

import csv
import math
import zlib
from dataclasses import dataclass, replace
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptyGroup, HeterogeneousGroup, InvalidState

AGGREGATE_ID = 2**16 - 1


class Kind(IntEnum):
    PHYSICAL = 0
    TWIN_FANOUT = 1
    TWIN_ROLLOUT = 2


class Role(IntEnum):
    PHYSICAL = 0
    IDENTICAL = 1
    DIVERGENT = 2


@dataclass(frozen=True)
class DomainId:
    id: int
    role: Role

    def __post_init__(self):
        if not 0 <= self.id <= AGGREGATE_ID:
            raise ValueError(f"domain id out of range: {self.id}")


PHYSICAL_DOMAIN = DomainId(0, Role.PHYSICAL)
IDENTICAL_DOMAIN = DomainId(1, Role.IDENTICAL)
AGGREGATE_DOMAIN = DomainId(AGGREGATE_ID, Role.DIVERGENT)


def divergent_domain(index: int) -> DomainId:
    """Id of the ``index``-th divergent domain (ids 2, 3, ...)."""
    return DomainId(2 + index, Role.DIVERGENT)


@dataclass(frozen=True)
class StateVec:
    values: tuple[float, ...]
    discrete_id: int | None = None

    @classmethod
    def of(cls, values: Iterable[float], discrete_id: int | None = None) -> "StateVec":
        return cls(tuple(float(v) for v in values), discrete_id)

    def array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Transition:
    state: StateVec
    action: int
    reward: float
    next_state: StateVec
    terminal: bool
    domain: DomainId = PHYSICAL_DOMAIN
    kind: Kind = Kind.PHYSICAL

    def __post_init__(self):
        if not math.isfinite(self.reward):
            raise InvalidState(f"non-finite reward {self.reward!r}")
        if self.kind is Kind.PHYSICAL and self.domain != PHYSICAL_DOMAIN:
            raise ValueError("PHYSICAL transitions must carry the physical domain id")


@dataclass(frozen=True)
class RngStream:
    """A named, independently seeded random stream.

    Equal ``(seed, label)`` pairs give identical sequences; distinct labels
    under one seed are spawned as independent children of one SeedSequence.
    """

    seed: int
    label: str

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def generator(self) -> np.random.Generator:
        key = zlib.crc32(self.label.encode("utf-8"))
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(key,))
        return np.random.Generator(np.random.PCG64(seq))


def encode_discrete(state: StateVec | float, bins: int, low: float, high: float) -> int:
    """Bin the first feature of ``state`` into ``[0, bins - 1]``."""
    if not low < high:
        raise ValueError("low must be < high")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    x = state.values[0] if isinstance(state, StateVec) else float(state)
    if not math.isfinite(x):
        raise InvalidState(f"cannot discretize non-finite value {x!r}")
    x = min(max(x, low), high)
    idx = math.floor(bins * (x - low) / (high - low))
    return min(max(idx, 0), bins - 1)


def transition_average(group: Sequence[Transition]) -> Transition:
    """Average a group of transitions that differ only in outcome.

    Rewards and next-state features are averaged; the result is tagged with
    the aggregate domain marker.
    """
    if not group:
        raise EmptyGroup("cannot average an empty group")
    head = group[0]
    width = len(head.next_state)
    for t in group[1:]:
        if t.state != head.state or t.action != head.action:
            raise HeterogeneousGroup("group members differ in (state, action)")
        if t.kind != head.kind or t.terminal != head.terminal:
            raise HeterogeneousGroup("group members differ in kind or terminal flag")
        if len(t.next_state) != width:
            raise HeterogeneousGroup("next_state lengths differ")
    # math.fsum keeps the mean independent of member order
    n = len(group)
    reward = math.fsum(t.reward for t in group) / n
    cols = zip(*(t.next_state.values for t in group))
    next_values = tuple(math.fsum(c) / n for c in cols)
    ids = {t.next_state.discrete_id for t in group}
    next_id = ids.pop() if len(ids) == 1 else None
    return replace(
        head,
        reward=reward,
        next_state=StateVec(next_values, next_id),
        domain=AGGREGATE_DOMAIN,
    )


def _log_header(width: int) -> list[str]:
    return (
        ["kind", "domain"]
        + [f"s{i}" for i in range(width)]
        + ["action", "reward"]
        + [f"ns{i}" for i in range(width)]
        + ["terminal"]
    )


def write_transition_log(path: str | Path, transitions: Sequence[Transition]) -> None:
    """Dump transitions as CSV, one record per line, reals printed exactly."""
    width = len(transitions[0].state) if transitions else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_log_header(width))
        for t in transitions:
            w.writerow(
                [t.kind.name, t.domain.id]
                + [repr(v) for v in t.state.values]
                + [t.action, repr(t.reward)]
                + [repr(v) for v in t.next_state.values]
                + [int(t.terminal)]
            )


def _domain_from_id(i: int) -> DomainId:
    if i == PHYSICAL_DOMAIN.id:
        return PHYSICAL_DOMAIN
    if i == IDENTICAL_DOMAIN.id:
        return IDENTICAL_DOMAIN
    return DomainId(i, Role.DIVERGENT)


def read_transition_log(path: str | Path) -> list[Transition]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    width = (len(header) - 5) // 2
    out = []
    for r in body:
        state = StateVec.of(float(v) for v in r[2 : 2 + width])
        action = int(r[2 + width])
        reward = float(r[3 + width])
        nxt = StateVec.of(float(v) for v in r[4 + width : 4 + 2 * width])
        out.append(
            Transition(state, action, reward, nxt, r[-1] == "1", _domain_from_id(int(r[1])), Kind[r[0]])
        )
    return out
