import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twinforge.core import (
    AGGREGATE_DOMAIN,
    AGGREGATE_ID,
    IDENTICAL_DOMAIN,
    PHYSICAL_DOMAIN,
    Kind,
    RngStream,
    Role,
    StateVec,
    Transition,
    divergent_domain,
    encode_discrete,
    read_transition_log,
    transition_average,
    write_transition_log,
)
from twinforge.errors import EmptyGroup, HeterogeneousGroup, InvalidState

finite = st.floats(-1e6, 1e6, allow_nan=False)


def fan(reward, nxt, action=0, state=(0.0,)):
    return Transition(StateVec.of(state), action, reward, StateVec.of(nxt), False, divergent_domain(0), Kind.TWIN_FANOUT)


class TestEncodeDiscrete:
    @pytest.mark.parametrize("x,expected", [(0.0, 0), (2000.0, 99), (999.0, 49)])
    def test_examples(self, x, expected):
        assert encode_discrete(StateVec((x,)), 100, 0.0, 2000.0) == expected

    def test_clamps_outside_range(self):
        assert encode_discrete(-5.0, 10, 0.0, 1.0) == 0
        assert encode_discrete(7.0, 10, 0.0, 1.0) == 9

    @pytest.mark.parametrize("x", [math.nan, math.inf, -math.inf])
    def test_non_finite_is_invalid_state(self, x):
        with pytest.raises(InvalidState):
            encode_discrete(x, 10, 0.0, 1.0)

    @given(finite, finite, st.integers(1, 500))
    def test_monotone(self, a, b, bins):
        lo, hi = min(a, b), max(a, b)
        assert encode_discrete(lo, bins, -1e5, 1e5) <= encode_discrete(hi, bins, -1e5, 1e5)

    @given(finite, st.integers(1, 500))
    def test_in_range(self, x, bins):
        assert 0 <= encode_discrete(x, bins, -100.0, 100.0) < bins


class TestTransition:
    def test_reward_must_be_finite(self):
        with pytest.raises(InvalidState):
            Transition(StateVec((0.0,)), 0, math.nan, StateVec((1.0,)), False)

    def test_physical_kind_needs_physical_domain(self):
        with pytest.raises(ValueError):
            Transition(StateVec((0.0,)), 0, 1.0, StateVec((1.0,)), False, IDENTICAL_DOMAIN, Kind.PHYSICAL)

    def test_reserved_ids(self):
        assert PHYSICAL_DOMAIN.role is Role.PHYSICAL
        assert IDENTICAL_DOMAIN.role is Role.IDENTICAL
        assert AGGREGATE_DOMAIN.id == 2**16 - 1 == AGGREGATE_ID
        assert AGGREGATE_DOMAIN.role is Role.DIVERGENT


class TestRngStream:
    def test_equal_pairs_reproduce(self):
        a = RngStream(42, "env").generator().random(8)
        b = RngStream(42, "env").generator().random(8)
        assert np.array_equal(a, b)

    def test_labels_differ(self):
        a = RngStream(42, "env").generator().random(1000)
        b = RngStream(42, "noise").generator().random(1000)
        assert not np.array_equal(a, b)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.1

    def test_seed_range(self):
        RngStream(2**64 - 1, "env").generator()
        with pytest.raises(ValueError):
            RngStream(2**64, "env")
        with pytest.raises(ValueError):
            RngStream(-1, "env")


class TestTransitionAverage:
    def test_mean_example(self):
        out = transition_average([fan(4.0, (1.0, 3.0)), fan(6.0, (3.0, 1.0))])
        assert out.reward == 5.0
        assert out.next_state.values == (2.0, 2.0)
        assert out.domain == AGGREGATE_DOMAIN
        assert out.kind is Kind.TWIN_FANOUT

    def test_singleton_is_identity_with_marker(self):
        t = fan(3.5, (1.0,))
        out = transition_average([t])
        assert out.reward == t.reward and out.next_state == t.next_state
        assert out.domain == AGGREGATE_DOMAIN

    def test_errors(self):
        with pytest.raises(EmptyGroup):
            transition_average([])
        with pytest.raises(HeterogeneousGroup):
            transition_average([fan(1.0, (0.0,), action=0), fan(1.0, (0.0,), action=1)])
        with pytest.raises(HeterogeneousGroup):
            transition_average([fan(1.0, (0.0,), state=(0.0,)), fan(1.0, (0.0,), state=(1.0,))])
        with pytest.raises(HeterogeneousGroup):
            transition_average([fan(1.0, (0.0,)), fan(1.0, (0.0, 1.0))])

    @given(st.lists(st.tuples(finite, finite, finite), min_size=1, max_size=8), st.randoms())
    def test_permutation_invariant(self, rows, rnd):
        group = [fan(r, (a, b)) for r, a, b in rows]
        shuffled = list(group)
        rnd.shuffle(shuffled)
        assert transition_average(group) == transition_average(shuffled)

    def test_noise_reduction_monte_carlo(self):
        # 5 noisy copies of a true reward: mean error within 3/sqrt(5) in >= 99% of groups
        rng = RngStream(11, "noise").generator()
        true = 2.0
        hits = 0
        n = 10_000
        for _ in range(n):
            g = [fan(true + float(rng.normal()), (0.0,)) for _ in range(5)]
            hits += abs(transition_average(g).reward - true) <= 3 / math.sqrt(5)
        assert hits / n >= 0.99


def test_transition_log_round_trip(tmp_path):
    ts = [
        Transition(StateVec((0.1, 2.0)), 3, -1.25, StateVec((0.2, 2.5)), False),
        fan(1 / 3, (7.0, 8.0), state=(1.0, 2.0)),
        Transition(StateVec((1.0, 1.0)), 0, 5.0, StateVec((1.0, 1.0)), True, AGGREGATE_DOMAIN, Kind.TWIN_ROLLOUT),
    ]
    path = tmp_path / "log.csv"
    write_transition_log(path, ts)
    text = path.read_bytes()
    assert text.startswith(b"kind,domain,s0,s1,action,reward,ns0,ns1,terminal\n")
    assert b"\r" not in text
    back = read_transition_log(path)
    assert [(t.state.values, t.action, t.reward, t.next_state.values, t.terminal, t.kind, t.domain) for t in back] == [
        (t.state.values, t.action, t.reward, t.next_state.values, t.terminal, t.kind, t.domain) for t in ts
    ]
