"""Query-or-predict decision rules and policy objects for the simulator.

Every rule here is a pure function of its configuration and the current
``MonitorState``.  The ``*Policy`` classes wrap them for the simulator; a
policy whose decisions never change over time can be tabulated once per
(state, elapsed) pair, which is what ``decision_table`` does.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .chain import NStepTable
from .predictor import MonitorState, optimal_prediction, predict_from_distribution

OPTIMAL = "optimal"
HOLD_LAST = "hold-last"


@dataclass(frozen=True)
class Decision:
    kind: str
    state: Optional[int] = None

    @property
    def is_query(self) -> bool:
        return self.kind == "query"

    @classmethod
    def predict(cls, state: int) -> Decision:
        return cls("predict", int(state))

    def __repr__(self):
        return "Query" if self.is_query else f"Predict({self.state})"


QUERY = Decision("query")


@dataclass(frozen=True)
class ThresholdVector:
    """Per-state number of slots between a query and the next one."""

    mu: tuple

    def __post_init__(self):
        mu = tuple(int(m) for m in self.mu)
        if any(m < 1 for m in mu):
            raise ValueError(f"thresholds must be >= 1, got {mu}")
        object.__setattr__(self, "mu", mu)

    def __getitem__(self, i):
        return self.mu[i]

    def __len__(self):
        return len(self.mu)

    def __iter__(self):
        return iter(self.mu)

    def check_cap(self, N: int) -> None:
        if any(m > N for m in self.mu):
            raise ValueError(f"thresholds {self.mu} exceed cap N={N}")


@dataclass(frozen=True)
class PolicyConfig:
    query_cost: float
    max_inter_query: int = 10
    interval: int = 2
    thresholds: Optional[ThresholdVector] = None

    def __post_init__(self):
        if self.query_cost < 0:
            raise ValueError("query cost must be non-negative")
        if self.max_inter_query < 1:
            raise ValueError("max_inter_query must be >= 1")
        if self.interval < 1:
            raise ValueError("interval must be >= 1")
        if self.thresholds is not None:
            self.thresholds.check_cap(self.max_inter_query)


def greedy_decide(table: NStepTable, loss: np.ndarray, cfg: PolicyConfig, ms: MonitorState) -> Decision:
    if ms.elapsed >= cfg.max_inter_query:
        return QUERY
    pred = optimal_prediction(table, loss, ms)
    # strict: a tie with the query cost queries
    if pred.expected_loss < cfg.query_cost:
        return Decision.predict(pred.state)
    return QUERY


def uniform_decide(cfg: PolicyConfig, ms: MonitorState, predictor_mode: str = OPTIMAL,
                   table: NStepTable | None = None, loss: np.ndarray | None = None) -> Decision:
    """Query every ``cfg.interval`` slots (never later than the cap).

    In ``hold-last`` mode the prediction is simply the last queried state;
    the ``optimal`` mode needs ``table`` and ``loss``.
    """
    if ms.elapsed >= min(cfg.interval, cfg.max_inter_query):
        return QUERY
    if predictor_mode == HOLD_LAST:
        return Decision.predict(ms.last_state)
    if predictor_mode != OPTIMAL:
        raise ValueError(f"unknown predictor mode {predictor_mode!r}")
    return Decision.predict(optimal_prediction(table, loss, ms).state)


def stationary_decide(stationary: np.ndarray, loss: np.ndarray, cfg: PolicyConfig, ms: MonitorState) -> Decision:
    if ms.elapsed >= cfg.max_inter_query:
        return QUERY
    pred = predict_from_distribution(np.asarray(stationary), loss)
    if pred.expected_loss < cfg.query_cost:
        return Decision.predict(pred.state)
    return QUERY


def threshold_decide(mu: ThresholdVector, table: NStepTable, loss: np.ndarray, ms: MonitorState) -> Decision:
    if ms.elapsed >= mu[ms.last_state]:
        return QUERY
    return Decision.predict(optimal_prediction(table, loss, ms).state)


class Policy:
    """Base for simulator-facing policies.

    ``stationary`` policies decide from ``MonitorState`` alone, so the
    simulator may tabulate them.  Learning policies override ``observe``.
    """

    name = "policy"
    stationary = True

    def decide(self, ms: MonitorState) -> Decision:
        raise NotImplementedError

    def observe(self, from_state: int, gap: int, observed: int) -> None:
        """Hook called after every query except the initial one."""

    def reset(self) -> None:
        """Restore the initial internal state (learning policies only)."""

    def stage_plan(self, i: int, N: int) -> tuple[int, list]:
        """Decisions for a stage opened by observing state ``i``.

        Returns ``(stop, preds)``: the first elapsed at which the policy
        queries, and ``preds[n]`` the predicted state for ``1 <= n < stop``
        (``preds[0]`` is a placeholder).
        """
        preds = [-1]
        for n in range(1, N + 1):
            d = self.decide(MonitorState(i, n))
            if d.is_query:
                return n, preds
            preds.append(d.state)
        raise RuntimeError(f"{self.name} did not query within cap N={N} from state {i}")

    def decision_table(self, num_states: int, N: int) -> list[tuple[int, list]]:
        """``stage_plan`` for every state; valid for the whole run if ``stationary``.

        Stationary policies cache the table per ``(num_states, N)``.
        """
        if not self.stationary:
            return [self.stage_plan(i, N) for i in range(num_states)]
        cache = self.__dict__.setdefault("_plan_cache", {})
        if (num_states, N) not in cache:
            cache[(num_states, N)] = [self.stage_plan(i, N) for i in range(num_states)]
        return cache[(num_states, N)]


class GreedyPolicy(Policy):
    name = "greedy"

    def __init__(self, table: NStepTable, loss: np.ndarray, cfg: PolicyConfig):
        self.table, self.loss, self.cfg = table, np.asarray(loss), cfg

    def decide(self, ms):
        return greedy_decide(self.table, self.loss, self.cfg, ms)


class UniformPolicy(Policy):
    def __init__(self, cfg: PolicyConfig, predictor_mode: str = OPTIMAL,
                 table: NStepTable | None = None, loss: np.ndarray | None = None):
        self.cfg, self.mode, self.table, self.loss = cfg, predictor_mode, table, loss
        self.name = "uniform" if predictor_mode == OPTIMAL else "uniform-np"

    def decide(self, ms):
        return uniform_decide(self.cfg, ms, self.mode, self.table, self.loss)


class StationaryPolicy(Policy):
    name = "stationary"

    def __init__(self, stationary: np.ndarray, loss: np.ndarray, cfg: PolicyConfig):
        self.distribution, self.loss, self.cfg = np.asarray(stationary), np.asarray(loss), cfg

    def decide(self, ms):
        return stationary_decide(self.distribution, self.loss, self.cfg, ms)


class ThresholdPolicy(Policy):
    name = "threshold"

    def __init__(self, mu: ThresholdVector | Sequence[int], table: NStepTable, loss: np.ndarray, name: str | None = None):
        self.mu = mu if isinstance(mu, ThresholdVector) else ThresholdVector(tuple(mu))
        self.table, self.loss = table, np.asarray(loss)
        if name:
            self.name = name

    def decide(self, ms):
        return threshold_decide(self.mu, self.table, self.loss, ms)
