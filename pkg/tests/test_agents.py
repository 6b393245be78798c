import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import finite_difference, naive_forward
from twinforge.agents import (
    Adam,
    DqnAgent,
    EpsilonSchedule,
    MlpParams,
    QTable,
    ReplayBuffer,
    copy_params,
    init_mlp,
    load_params,
    mlp_forward,
    mlp_train_step,
    params_equal,
    ql_select,
    ql_update,
    save_params,
)
from twinforge.agents.dqn import DqnParams
from twinforge.agents.mlp import dense_gradient, td_grad, td_loss
from twinforge.agents.params import from_bytes, to_bytes
from twinforge.core import StateVec, Transition
from twinforge.errors import NumericError, ShapeError


def tr(s, a, r, ns, terminal=False, values=None):
    v = values or (float(s),)
    return Transition(StateVec(v, s), a, r, StateVec((float(ns),), ns), terminal)


class TestQlSelect:
    def test_greedy_tie_lowest_index(self):
        q = QTable(np.array([[1.0, 5.0, 5.0], [2.0, 2.0, 2.0]]))
        assert ql_select(q, 0, 0.0, np.random.default_rng(0)) == 1
        assert ql_select(q, 1, 0.0, np.random.default_rng(0)) == 0

    def test_uniform_when_eps_one(self):
        q = QTable(np.array([[0.0, 9.0, 0.0, 0.0]]))
        rng = np.random.default_rng(1)
        counts = np.bincount([ql_select(q, 0, 1.0, rng) for _ in range(10_000)], minlength=4)
        sigma = math.sqrt(10_000 * 0.25 * 0.75)
        assert np.all(np.abs(counts - 2500) <= 3 * sigma)

    @given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8), st.floats(1e-3, 1e3))
    def test_scale_invariant(self, row, c):
        q = QTable(np.array([row]))
        scaled = QTable(np.array([row]) * c)
        rng = np.random.default_rng(0)
        assert ql_select(q, 0, 0.0, rng) == ql_select(scaled, 0, 0.0, rng)


class TestQlUpdate:
    def test_terminal_alpha_one(self):
        q = QTable.zeros(2, 2, learning_rate=1.0)
        ql_update(q, tr(0, 1, 5.0, 1, terminal=True))
        assert q.values[0, 1] == 5.0

    def test_hand_arithmetic(self):
        q = QTable(np.array([[1.0, 0.0], [2.0, -1.0]]), learning_rate=0.5, discount=0.9)
        td = ql_update(q, tr(0, 0, 1.0, 1))
        assert q.values[0, 0] == pytest.approx(1.9)
        assert td == pytest.approx(1.8)

    def test_override(self):
        q = QTable(np.array([[3.0], [100.0]]), learning_rate=1.0)
        ql_update(q, tr(0, 0, 0.0, 1), target_override=7.0)
        assert q.values[0, 0] == 7.0

    def test_non_finite_target(self):
        with pytest.raises(NumericError):
            ql_update(QTable.zeros(2, 1), tr(0, 0, 0.0, 1), target_override=math.inf)

    @given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0.01, 1.0))
    def test_terminal_moves_toward_reward(self, q0, r, alpha):
        q = QTable(np.array([[q0], [1e6]]), learning_rate=alpha)
        ql_update(q, tr(0, 0, r, 1, terminal=True))
        assert abs(q.values[0, 0] - r) <= abs(q0 - r) + 1e-9


class TestSchedule:
    def test_linear(self):
        s = EpsilonSchedule(1.0, 0.05, 100)
        assert s.value(0) == 1.0 and s.value(100) == 0.05 and s.value(1e6) == 0.05
        assert s.value(50) == pytest.approx(0.525)

    def test_invalid(self):
        with pytest.raises(ValueError):
            EpsilonSchedule(0.1, 0.5, 10)
        with pytest.raises(ValueError):
            EpsilonSchedule(1.0, 0.0, 0)


class TestMlp:
    def test_zero_params_zero_output(self):
        assert np.array_equal(mlp_forward(MlpParams((3, 4, 2)), [1.0, 2.0, 3.0]), np.zeros(2))

    def test_identity_layer(self):
        p = MlpParams((3, 2))
        p.weights[0][:] = [[1, 0], [0, 1], [0, 0]]
        assert mlp_forward(p, [4.0, -5.0, 6.0]).tolist() == [4.0, -5.0]

    def test_matches_naive(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            p = init_mlp((4, 8, 8, 3), rng)
            p.flat[:] += rng.normal(0, 0.1, p.flat.size)
            x = rng.normal(size=4)
            ref = naive_forward(p.sizes, p.flat, x)
            assert np.allclose(mlp_forward(p, x), ref, rtol=1e-12, atol=1e-14)

    def test_shape_errors(self):
        with pytest.raises(ShapeError):
            mlp_forward(MlpParams((3, 2)), [1.0, 2.0])
        with pytest.raises(ShapeError):
            MlpParams((3, 2), np.zeros(5))

    def test_gradient_check(self):
        rng = np.random.default_rng(42)
        worst = 0.0
        for _ in range(20):
            p = init_mlp((4, 8, 8, 3), rng)
            p.flat[:] += rng.normal(0, 0.1, p.flat.size)
            X = rng.normal(size=(6, 4))
            acts = rng.integers(0, 3, 6)
            y = rng.normal(size=6)
            analytic = dense_gradient(p, td_grad(p, X, acts, y))
            numeric = finite_difference(lambda th: td_loss(MlpParams(p.sizes, th), X, acts, y), p.flat.copy())
            scale = np.maximum(np.abs(analytic), np.abs(numeric))
            mask = scale > 0
            worst = max(worst, float((np.abs(analytic - numeric)[mask] / scale[mask]).max()))
        assert worst < 1e-4

    def test_targets_equal_predictions(self):
        # dyadic weights and integer inputs keep every sum exact, so the
        # kernel and the forward pass agree bit for bit
        rng = np.random.default_rng(1)
        p = MlpParams((4, 8, 3), rng.integers(-8, 9, MlpParams((4, 8, 3)).flat.size) / 8.0)
        X = rng.integers(-3, 4, (5, 4)).astype(float)
        acts = rng.integers(0, 3, 5)
        y = mlp_forward(p, X)[np.arange(5), acts]
        before = p.flat.copy()
        batch = [(Transition(StateVec(tuple(x)), int(a), 0.0, StateVec(tuple(x)), False), float(t))
                 for x, a, t in zip(X, acts, y)]
        loss = mlp_train_step(p, batch, 1e-3, p.copy())
        assert loss == 0.0 and np.array_equal(p.flat, before)

    def test_linear_single_sample_hand_update(self):
        p = MlpParams((3, 2), np.array([0.5, -1.0, 0.25, 2.0, 1.0, 0.0, 0.1, 0.2]))
        x = np.array([1.0, 2.0, -1.0])
        q1 = x @ p.weights[0][:, 1] + p.biases[0][1]
        g = 2 * (q1 - 3.0)
        lr = 0.01
        before = p.flat.copy()
        t = Transition(StateVec(tuple(x)), 1, 0.0, StateVec(tuple(x)), True)
        loss = mlp_train_step(p, [(t, 3.0)], lr, p.copy())
        assert loss == pytest.approx((q1 - 3.0) ** 2)
        # first Adam step moves each touched parameter by lr * g / (|g| + eps)
        gW = g * x
        step = lambda gi: lr * gi / (abs(gi) + 1e-8)  # noqa: E731
        assert p.weights[0][:, 1] == pytest.approx(before[[1, 3, 5]] - [step(v) for v in gW], rel=1e-9)
        assert p.biases[0][1] == pytest.approx(before[7] - step(g), rel=1e-9)
        assert np.array_equal(p.weights[0][:, 0], before[[0, 2, 4]]) and p.biases[0][0] == before[6]

    def test_missing_targets_bootstrap_from_target_net(self):
        rng = np.random.default_rng(3)
        p = init_mlp((2, 4, 2), rng)
        tgt = init_mlp((2, 4, 2), rng)
        s, ns = (0.3, -0.2), (0.1, 0.9)
        t = Transition(StateVec(s), 0, 1.5, StateVec(ns), False)
        expected = 1.5 + 0.9 * mlp_forward(tgt, ns).max()
        q = mlp_forward(p, s)[0]
        loss = mlp_train_step(p, [(t, None)], 1e-3, tgt, gamma=0.9)
        assert loss == pytest.approx((q - expected) ** 2)

    def test_non_finite_targets(self):
        p = MlpParams((2, 2))
        t = Transition(StateVec((0.0, 0.0)), 0, 0.0, StateVec((0.0, 0.0)), True)
        with pytest.raises(NumericError):
            mlp_train_step(p, [(t, math.nan)], 1e-3, p.copy())


class TestDqnAgent:
    def test_target_changes_only_at_sync(self):
        agent = DqnAgent(3, 4, hidden=(8, 8), target_sync=5, seed=0)
        rng = np.random.default_rng(0)
        snapshots = [agent.target.copy()]
        for i in range(1, 12):
            agent.update(rng.random((4, 3)), rng.integers(0, 4, 4), rng.random(4))
            snapshots.append(agent.target.copy())
            if i % 5 == 0:
                assert agent.target == agent.online
        for i in range(1, 12):
            assert (snapshots[i] == snapshots[i - 1]) == (i % 5 != 0)

    def test_act_is_greedy_at_eps_zero(self):
        agent = DqnAgent(3, 4, seed=1)
        s = StateVec((0.1, 0.2, 0.3))
        assert agent.act(s, 0.0, np.random.default_rng(0)) == int(np.argmax(mlp_forward(agent.online, s.values)))


class TestParams:
    def test_copy_independent(self):
        q = QTable.zeros(3, 2)
        c = copy_params(q)
        assert params_equal(c, q)
        c.values[0, 0] = 1.0
        assert q.values[0, 0] == 0.0
        m = init_mlp((2, 3, 2), np.random.default_rng(0))
        mc = copy_params(m)
        mc.flat[0] += 1
        assert not params_equal(m, mc)

    @pytest.mark.parametrize("kind", ["q", "mlp", "dqn"])
    def test_serialization_round_trip(self, kind, tmp_path):
        rng = np.random.default_rng(0)
        if kind == "q":
            p = QTable(rng.normal(size=(4, 3)), 0.3, 0.8)
        elif kind == "mlp":
            p = init_mlp((4, 8, 8, 3), rng)
        else:
            p = DqnParams(init_mlp((2, 5, 3), rng), init_mlp((2, 5, 3), rng))
        save_params(tmp_path / "p.bin", p)
        data = (tmp_path / "p.bin").read_bytes()
        assert data[:8] == b"TWFPARAM"
        assert params_equal(load_params(tmp_path / "p.bin"), p)

    def test_rejects_corrupt(self):
        data = to_bytes(QTable.zeros(2, 2))
        with pytest.raises(ValueError):
            from_bytes(b"XXXXXXXX" + data[8:])
        with pytest.raises(ValueError):
            from_bytes(data + b"\0")


class TestReplay:
    def test_eviction_keeps_order(self):
        buf = ReplayBuffer(3, 1)
        for i in range(5):
            buf.add(tr(0, 0, float(i), 0), target=float(i) if i % 2 else None)
        recs = buf.records()
        assert [t.reward for t, _ in recs] == [2.0, 3.0, 4.0]
        assert [y for _, y in recs] == [None, 3.0, None]

    @given(st.integers(1, 20), st.lists(st.floats(-10, 10), max_size=60))
    def test_size_and_survivors(self, cap, rewards):
        buf = ReplayBuffer(cap, 1)
        for r in rewards:
            buf.add(tr(0, 0, r, 0))
        assert len(buf) == min(cap, len(rewards))
        assert [t.reward for t in buf.transitions()] == rewards[-cap:] if rewards else True

    def test_record_round_trip(self):
        buf = ReplayBuffer(4, 2)
        t = Transition(StateVec((0.5, 1.5), 3), 1, 2.0, StateVec((1.0, 2.0), 4), True)
        buf.add(t, 7.5)
        assert buf.records() == [(t, 7.5)]


def test_adam_lazy_columns_untouched():
    p = init_mlp((3, 4, 5), np.random.default_rng(0))
    opt = Adam(p, 1e-2)
    before = p.copy()
    X = np.random.default_rng(1).random((4, 3))
    opt.step(p, td_grad(p, X, np.array([1, 1, 3, 3]), np.zeros(4)))
    assert opt.last_cols.tolist() == [1, 3]
    for c in (0, 2, 4):
        assert np.array_equal(p.weights[-1][:, c], before.weights[-1][:, c])
