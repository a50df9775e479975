import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from markov_monitor.chain import NStepTable, random_chain
from markov_monitor.planner import policy_iteration
from markov_monitor.policies import (HOLD_LAST, QUERY, Decision, GreedyPolicy, PolicyConfig, StationaryPolicy,
                                     ThresholdPolicy, ThresholdVector, UniformPolicy, greedy_decide,
                                     stationary_decide, threshold_decide, uniform_decide)
from markov_monitor.predictor import MonitorState, expected_losses, optimal_prediction

FLAT = np.full(5, 0.2)


class TestGreedy:
    def test_absorbing_never_queries(self, absorbing):
        t = absorbing.table(10)
        cfg = PolicyConfig(1.0, 10)
        for n in range(1, 10):
            assert greedy_decide(t, absorbing.loss, cfg, MonitorState(0, n)) == Decision.predict(1)

    def test_cap(self, absorbing):
        cfg = PolicyConfig(1.0, 10)
        assert greedy_decide(absorbing.table(10), absorbing.loss, cfg, MonitorState(0, 10)).is_query

    def test_zero_cost_always_queries(self, five):
        t = five.table(10)
        cfg = PolicyConfig(0.0, 10)
        assert all(greedy_decide(t, five.loss, cfg, MonitorState(i, n)) == QUERY
                   for i in range(5) for n in range(1, 11))

    def test_tie_queries(self, absorbing):
        # expected loss exactly 0.5 == c: strict rule queries
        assert greedy_decide(absorbing.table(3), absorbing.loss, PolicyConfig(0.5, 3), MonitorState(0, 1)).is_query

    def test_cost_above_max_loss(self, five):
        t = five.table(10)
        cfg = PolicyConfig(4.01, 10)
        for i in range(5):
            for n in range(1, 10):
                assert not greedy_decide(t, five.loss, cfg, MonitorState(i, n)).is_query


class TestUniform:
    def test_interval_two(self):
        cfg = PolicyConfig(1.0, 10, interval=2)
        assert uniform_decide(cfg, MonitorState(2, 1), HOLD_LAST) == Decision.predict(2)
        assert uniform_decide(cfg, MonitorState(2, 2), HOLD_LAST).is_query

    def test_interval_one(self):
        assert uniform_decide(PolicyConfig(1.0, 10, interval=1), MonitorState(0, 1), HOLD_LAST).is_query

    def test_optimal_mode(self, five):
        t = five.table(10)
        cfg = PolicyConfig(1.0, 10, interval=4)
        for n in range(1, 4):
            d = uniform_decide(cfg, MonitorState(3, n), table=t, loss=five.loss)
            assert d.state == optimal_prediction(t, five.loss, MonitorState(3, n)).state

    def test_interval_capped(self):
        assert uniform_decide(PolicyConfig(1.0, 3, interval=8), MonitorState(0, 3), HOLD_LAST).is_query

    def test_names(self):
        cfg = PolicyConfig(1.0)
        assert UniformPolicy(cfg, HOLD_LAST).name == "uniform-np"


class TestStationary:
    def test_flat_losses(self, five):
        np.testing.assert_allclose(expected_losses(FLAT, five.loss), [2.0, 1.4, 1.2, 1.4, 2.0])

    def test_predicts_middle(self, five):
        cfg = PolicyConfig(1.3, 10)
        for n in range(1, 10):
            assert stationary_decide(FLAT, five.loss, cfg, MonitorState(0, n)) == Decision.predict(2)
        assert stationary_decide(FLAT, five.loss, cfg, MonitorState(0, 10)).is_query

    def test_cheap_query(self, five):
        assert stationary_decide(FLAT, five.loss, PolicyConfig(1.2, 10), MonitorState(0, 1)).is_query

    def test_zero_loss(self):
        cfg = PolicyConfig(0.5, 6)
        for n in range(1, 6):
            assert not stationary_decide(FLAT, np.zeros((5, 5)), cfg, MonitorState(1, n)).is_query


class TestThreshold:
    def test_all_ones(self, five):
        mu = ThresholdVector((1,) * 5)
        assert all(threshold_decide(mu, five.table(1), five.loss, MonitorState(i, 1)).is_query for i in range(5))

    def test_absorbing_trace(self, absorbing):
        N = 10
        pol = ThresholdPolicy((1, N, N), absorbing.table(N), absorbing.loss)
        stop, preds = pol.stage_plan(1, N)
        assert stop == N and preds[1:] == [1] * (N - 1)
        assert pol.stage_plan(0, N) == (1, [-1])

    def test_predicts_optimally(self, five):
        t = five.table(10)
        mu = ThresholdVector((3, 2, 2, 1, 2))
        for i in range(5):
            for n in range(1, mu[i]):
                d = threshold_decide(mu, t, five.loss, MonitorState(i, n))
                assert d.state == optimal_prediction(t, five.loss, MonitorState(i, n)).state

    def test_invalid(self):
        with pytest.raises(ValueError):
            ThresholdVector((0, 2))
        with pytest.raises(ValueError):
            PolicyConfig(1.0, 4, thresholds=ThresholdVector((5, 1)))

    def test_matches_greedy_when_stops_agree(self, five):
        # wherever greedy and the planner stop at the same elapsed, the plans coincide
        N, c = 10, 1.4
        t = five.table(N)
        sol = policy_iteration(t, five.loss, c, N)
        g = GreedyPolicy(t, five.loss, PolicyConfig(c, N)).decision_table(5, N)
        th = ThresholdPolicy(sol.thresholds, t, five.loss).decision_table(5, N)
        agree = [i for i in range(5) if g[i][0] == th[i][0]]
        assert agree
        for i in agree:
            assert g[i] == th[i]


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(2, 5), N=st.integers(1, 8),
       c=st.floats(0.0, 5.0), delta=st.integers(1, 10))
def test_every_policy_queries_by_cap(seed, K, N, c, delta):
    rng = np.random.default_rng(seed)
    P = random_chain(K, rng)
    L = np.abs(np.subtract.outer(np.arange(K), np.arange(K))).astype(float)
    t = NStepTable.build(P, N)
    cfg = PolicyConfig(c, N, delta)
    mu = tuple(int(m) for m in rng.integers(1, N + 1, K))
    policies = [GreedyPolicy(t, L, cfg), UniformPolicy(cfg, table=t, loss=L), UniformPolicy(cfg, HOLD_LAST),
                StationaryPolicy(np.full(K, 1 / K), L, cfg), ThresholdPolicy(mu, t, L)]
    for pol in policies:
        for i, (stop, preds) in enumerate(pol.decision_table(K, N)):
            assert 1 <= stop <= N
            assert len(preds) == stop
            assert pol.decide(MonitorState(i, N)).is_query
