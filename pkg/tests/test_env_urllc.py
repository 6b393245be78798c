import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twinforge.core import RngStream
from twinforge.envs.urllc import (
    DEFAULT_APS,
    AccessPoint,
    Outcome,
    Phase,
    UrllcConfig,
    UrllcEnv,
    UrllcEnvState,
    UrllcTask,
    urllc_reset,
    urllc_step,
)
from twinforge.errors import ConfigError, EpisodeOver

CFG = UrllcConfig()


def state_at(x, aps, size=20e6, deadline=6.0, speed=20.0):
    return UrllcEnvState(x, speed, 0.0, UrllcTask(size, deadline), tuple(aps), Phase.CHOOSING)


def test_success_example():
    ap = AccessPoint(500.0, 200.0, 10e6, 2.0)
    s = state_at(500.0, [ap], size=10e6, deadline=5.0)
    nxt, reward, terminal, info = urllc_step(s, 0, CFG)
    assert info.outcome is Outcome.SUCCESS
    assert info.wait_time == 0.0 and info.tx_time == 1.0 and info.latency == 1.0
    # residence from the centre: 200 m at 20 m/s
    assert (ap.position + ap.radius - s.vehicle_pos) / s.vehicle_speed == 10.0
    assert reward == 100.0 - 5.0 * 1.0 - 1.0 * 2.0 * 1.0
    assert terminal and nxt.phase is Phase.DONE


def test_no_coverage_behind_vehicle():
    ap = AccessPoint(100.0, 50.0, 10e6, 3.0)
    _, reward, terminal, info = urllc_step(state_at(400.0, [ap]), 0, CFG)
    assert info.outcome is Outcome.FAIL_NO_COVERAGE
    assert reward == 0.0 and terminal


def test_left_coverage_at_edge():
    ap = AccessPoint(1000.0, 100.0, 1e6, 1.0)
    # tx_time 200 s > full crossing time 2*100/20 = 10 s
    s = state_at(900.0, [ap], size=200e6)
    _, reward, _, info = urllc_step(s, 0, CFG)
    assert info.outcome is Outcome.FAIL_LEFT_COVERAGE
    assert info.tx_time == 10.0
    assert reward == -5.0 * 10.0 - 1.0 * 10.0


def test_deadline_failure_with_wait():
    ap = AccessPoint(1000.0, 100.0, 20e6, 1.0)
    # wait (900-700)/20 = 10 s, tx 1 s, deadline 6 s
    _, reward, _, info = urllc_step(state_at(700.0, [ap]), 0, CFG)
    assert info.outcome is Outcome.FAIL_DEADLINE
    assert info.wait_time == 10.0 and info.latency == 11.0
    assert reward == -5.0 * 11.0 - 1.0 * 1.0


def test_step_after_done():
    env = UrllcEnv(CFG, seed=1)
    env.reset()
    env.step(0)
    with pytest.raises(EpisodeOver):
        env.step(1)


def test_reset_deterministic_and_config_errors():
    a = urllc_reset(CFG, RngStream(7, "env").generator())
    b = urllc_reset(CFG, RngStream(7, "env").generator())
    assert a == b and a.phase is Phase.CHOOSING and a.elapsed == 0.0
    with pytest.raises(ConfigError):
        UrllcEnv(CFG.with_aps([]))
    with pytest.raises(ConfigError):
        CFG.with_aps([AccessPoint(1.0, 0.0, 1.0, 0.0)]).validate()


def test_reset_position_mean():
    positions = [urllc_reset(CFG, RngStream(seed, "env").generator()).vehicle_pos for seed in range(10_000)]
    target = CFG.road_length * 0.25
    assert abs(np.mean(positions) - target) <= 0.02 * target
    assert 0.0 <= min(positions) and max(positions) <= CFG.road_length * 0.5


def test_default_instance():
    assert DEFAULT_APS[:4] == (
        AccessPoint(400.0, 250.0, 10e6, 1.0),
        AccessPoint(900.0, 150.0, 50e6, 4.0),
        AccessPoint(1300.0, 300.0, 20e6, 2.0),
        AccessPoint(1800.0, 200.0, 40e6, 3.0),
    )
    env = UrllcEnv()
    assert env.action_count == 5 and env.state_count == 100 and env.obs_dim == 1


def test_one_terminal_per_episode():
    env = UrllcEnv(seed=3)
    for ep in range(50):
        env.reset()
        _, _, terminal, _ = env.step(ep % env.action_count)
        assert terminal


class TestSnapshot:
    def test_round_trip_step(self):
        env = UrllcEnv(seed=5)
        env.reset()
        snap = env.snapshot()
        direct = env.step(2)
        env.restore(snap)
        again = env.step(2)
        assert direct[:3] == again[:3] and direct[3] == again[3]

    def test_two_restores_diverge_only_in_outcome(self):
        env = UrllcEnv(seed=5)
        env.reset()
        snap = env.snapshot()
        env.step(0)
        a = env.state
        env.restore(snap)
        env.step(3)
        b = env.state
        assert a.task == b.task and a.aps == b.aps and a.vehicle_speed == b.vehicle_speed

    def test_fuzz_serialized_round_trip(self):
        rng = np.random.default_rng(0)
        env = UrllcEnv(seed=9)
        for _ in range(100):
            env.reset()
            if rng.random() < 0.5:
                env.step(int(rng.integers(env.action_count)))
            snap = env.snapshot()
            text = snap.serialize()
            other = env.replica()
            other.reset()
            other.restore(snap)
            assert other.snapshot().serialize() == text
            assert json.loads(text)["env"] == "urllc"
            # the RNG position is part of the snapshot
            assert other.rng.random() == env.rng.random()


aps = st.builds(
    AccessPoint,
    st.floats(0, 2000),
    st.floats(1, 500),
    st.floats(1e5, 1e8),
    st.floats(0, 10),
)


@given(st.floats(0, 2000), aps, st.floats(1e5, 1e8))
def test_reward_bounds(x, ap, size):
    cfg = UrllcConfig(aps=(ap,), task_size=size)
    low, high = cfg.reward_bounds()
    _, r, _, _ = urllc_step(state_at(x, [ap], size=size), 0, cfg)
    assert low <= r <= high


@given(st.floats(0, 2000), aps, st.floats(1.0, 10.0), st.floats(1e5, 1e8))
def test_faster_ap_never_worse(x, ap, factor, size):
    fast = AccessPoint(ap.position, ap.radius, ap.rate * factor, ap.cost_per_second)
    s = state_at(x, [ap, fast], size=size)
    _, slow_r, _, _ = urllc_step(s, 0, CFG)
    _, fast_r, _, _ = urllc_step(s, 1, CFG)
    assert fast_r >= slow_r - 1e-9
