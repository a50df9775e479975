"""Transition-matrix estimation by projected SGD from irregularly spaced queries.

Each query that follows a query ``n`` slots earlier yields an observation
``(i, n, j)``: the chain went from ``s_i`` to ``s_j`` in ``n`` steps.  The
estimator fits ``P_hat`` by descending the squared error between the one-hot
outcome and row ``i`` of ``P_hat^n``, then projecting each row back onto
the probability simplex by clamping and renormalizing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import NStepTable, _cumulative_row
from .errors import HorizonExceeded
from .policies import Decision, Policy, PolicyConfig, greedy_decide
from .predictor import MonitorState, expected_losses


@dataclass(frozen=True)
class QueryObservation:
    from_state: int
    gap: int
    observed: int

    def __post_init__(self):
        if self.gap < 1:
            raise ValueError("gap must be >= 1")


@dataclass(frozen=True)
class EstimatorState:
    """Current estimate, number of updates applied so far, and schedule constants."""

    estimate: np.ndarray
    update_count: int
    max_gap: int
    num_states: int

    @classmethod
    def uniform(cls, num_states: int, max_gap: int) -> EstimatorState:
        est = np.full((num_states, num_states), 1.0 / num_states)
        return cls(est, 0, max_gap, num_states)

    def next_learning_rate(self) -> float:
        return learning_rate(self.update_count + 1, self.max_gap, self.num_states)


def learning_rate(m: int, N: int, K: int) -> float:
    """Step size for the m-th update (m >= 1): ``1 / (8 N K + m)``."""
    return 1.0 / (8 * N * K + m)


def _forward_rows(P: np.ndarray, i: int, n: int) -> np.ndarray:
    """rows[m] = e_i P^m for m = 0..n."""
    rows = np.empty((n + 1, P.shape[0]))
    rows[0] = 0.0
    rows[0, i] = 1.0
    for m in range(1, n + 1):
        rows[m] = rows[m - 1] @ P
    return rows


def prediction_loss_F(est: EstimatorState | np.ndarray, obs: QueryObservation) -> float:
    P = est.estimate if isinstance(est, EstimatorState) else np.asarray(est, dtype=float)
    p = _forward_rows(P, obs.from_state, obs.gap)[-1]
    y = np.zeros_like(p)
    y[obs.observed] = 1.0
    return float(np.sum((y - p) ** 2))


def gradient_F(est: EstimatorState | np.ndarray, obs: QueryObservation) -> np.ndarray:
    """Exact gradient of ``prediction_loss_F`` w.r.t. every entry of ``P_hat``.

    The n-step prediction is an n-layer network sharing the weights
    ``P_hat``; the forward pass stores ``e_i P^{m-1}`` and the backward pass
    propagates ``P^{n-m} g``, so layer m contributes their outer product.
    """
    if isinstance(est, EstimatorState):
        P = est.estimate
        if obs.gap > est.max_gap:
            raise HorizonExceeded(f"gap {obs.gap} exceeds max inter-query time {est.max_gap}")
    else:
        P = np.asarray(est, dtype=float)
    n = obs.gap
    rows = _forward_rows(P, obs.from_state, n)
    y = np.zeros(P.shape[0])
    y[obs.observed] = 1.0
    # backs[m - 1] = P^{n-m} g, the error signal reaching layer m
    backs = np.empty((n, P.shape[0]))
    backs[n - 1] = -2.0 * (y - rows[n])
    for m in range(n - 1, 0, -1):
        backs[m - 1] = P @ backs[m]
    return rows[:n].T @ backs


def project_row_stochastic(matrix: np.ndarray) -> np.ndarray:
    """Clamp negatives to zero and rescale rows to sum to one.

    A row with nothing left after clamping becomes uniform.
    """
    M = np.maximum(np.asarray(matrix, dtype=float), 0.0)
    sums = M.sum(axis=1, keepdims=True)
    K = M.shape[1]
    dead = sums[:, 0] <= 0.0
    M[dead] = 1.0 / K
    sums[dead] = 1.0
    return M / sums


def psgd_update(est: EstimatorState, obs: QueryObservation) -> EstimatorState:
    m = est.update_count + 1
    eta = learning_rate(m, est.max_gap, est.num_states)
    new = project_row_stochastic(est.estimate - eta * gradient_F(est, obs))
    return EstimatorState(new, m, est.max_gap, est.num_states)


def pg_decide(est: EstimatorState, loss: np.ndarray, cfg: PolicyConfig, ms: MonitorState,
              table: NStepTable | None = None) -> Decision:
    """Greedy decision computed on the current estimate instead of the truth.

    ``table`` may carry precomputed powers of ``est.estimate``.
    """
    if table is None:
        table = NStepTable.build(est.estimate, max(cfg.max_inter_query, 1))
    return greedy_decide(table, loss, cfg, ms)


class PSGDGreedyPolicy(Policy):
    """Greedy policy on a PSGD estimate that is refined after every query."""

    name = "psgd-greedy"
    stationary = False

    def __init__(self, num_states: int, loss: np.ndarray, cfg: PolicyConfig, initial: np.ndarray | None = None):
        self.loss = np.asarray(loss)
        self.cfg = cfg
        self.num_states = num_states
        self.initial = initial
        self.reset()

    def reset(self):
        if self.initial is None:
            self.state = EstimatorState.uniform(self.num_states, self.cfg.max_inter_query)
        else:
            self.state = EstimatorState(project_row_stochastic(self.initial), 0,
                                        self.cfg.max_inter_query, self.num_states)
        self._refresh()

    def _refresh(self):
        P = self.state.estimate
        self._powers = [np.eye(self.num_states), P]
        self._table = None

    def _power(self, n):
        # same recurrence as NStepTable.build, so results are bit-identical
        while len(self._powers) <= n:
            self._powers.append(self._powers[-1] @ self.state.estimate)
        return self._powers[n]

    @property
    def table(self) -> NStepTable:
        if self._table is None:
            self._table = NStepTable.build(self.state.estimate, self.cfg.max_inter_query)
        return self._table

    def decide(self, ms):
        return pg_decide(self.state, self.loss, self.cfg, ms, self.table)

    def observe(self, from_state, gap, observed):
        self.state = psgd_update(self.state, QueryObservation(from_state, gap, observed))
        self._refresh()

    def stage_plan(self, i, N):
        # batched pg_decide over elapsed 1..N-1; elapsed 1 first since cheap queries stop there
        c = self.cfg.query_cost
        if N == 1:
            return 1, [-1]
        costs = expected_losses(self.state.estimate[i], self.loss)
        k = int(np.argmin(costs))
        if not costs[k] < c:
            return 1, [-1]
        rows = np.array([self._power(n)[i] for n in range(1, N)])
        costs = expected_losses(rows, self.loss)
        ks = np.argmin(costs, axis=1)
        over = np.flatnonzero(~(costs[np.arange(N - 1), ks] < c))
        stop = int(over[0]) + 1 if over.size else N
        return stop, [-1] + ks[: stop - 1].tolist()


def learn_from_periodic_queries(transition: np.ndarray, gap: int, updates: int, rng: np.random.Generator,
                                max_gap: int | None = None, every: int = 1000, start: int = 0):
    """Run PSGD on queries spaced exactly ``gap`` slots apart.

    Returns the final ``EstimatorState`` and a trace of
    ``(update, frobenius_dist, eta)`` sampled every ``every`` updates.
    """
    P = np.asarray(transition, dtype=float)
    K = P.shape[0]
    Pn = np.linalg.matrix_power(P, gap)
    cum = [np.asarray(_cumulative_row(row)) for row in Pn]
    u = rng.random(updates)
    est = EstimatorState.uniform(K, max_gap or gap)
    x = start
    trace = []
    for m in range(1, updates + 1):
        eta = est.next_learning_rate()
        j = int(np.searchsorted(cum[x], u[m - 1], side="right"))
        est = psgd_update(est, QueryObservation(x, gap, j))
        x = j
        if m % every == 0 or m == updates:
            trace.append((m, float(np.linalg.norm(est.estimate - P)), eta))
    return est, trace
