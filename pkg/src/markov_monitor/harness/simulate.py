"""Slot-by-slot simulation with cost accounting.

Slot 0 is always a query (charged ``c``) so that every policy starts from
the same information.  Slots run ``0 .. horizon-1`` and the realized
average is ``(prediction losses + c * queries) / horizon``.

The chain evolves independently of the monitor, so the true state path
can be drawn once and replayed for every policy; that is how common random
numbers are obtained across policies and grid points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..chain import ChainSpec, sample_path
from ..policies import Policy


@dataclass
class CostLedger:
    total_prediction_loss: float = 0.0
    total_query_cost: float = 0.0
    slots: int = 0
    queries: int = 0
    query_cost: float = 0.0

    @property
    def total(self) -> float:
        return self.total_prediction_loss + self.total_query_cost

    @property
    def average(self) -> float:
        return self.total / self.slots

    @property
    def queries_per_slot(self) -> float:
        return self.queries / self.slots


@dataclass
class TrajectoryRecord:
    """Per-slot trace rows: (t, true_state, action, predicted, loss, cumulative_cost)."""

    rows: list = field(default_factory=list)

    COLUMNS = ("t", "state", "action", "predicted", "loss", "cumulative")


def episode_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; stable across runs and processes."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


def simulate_path(path, loss: np.ndarray, policy: Policy, c: float, N: int,
                  trace: bool = False) -> tuple[CostLedger, TrajectoryRecord | None]:
    """Run ``policy`` along a pre-drawn state path.

    Decisions are fetched one stage at a time via ``Policy.stage_plan``;
    stationary policies are tabulated once, learning policies are asked
    again after every ``observe``.
    """
    path = np.asarray(path).tolist()
    horizon = len(path)
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    loss = np.asarray(loss)
    K = loss.shape[0]
    policy.reset()
    columns = [loss[:, k].tolist() for k in range(K)]
    static = policy.decision_table(K, N) if policy.stationary else None
    rec = TrajectoryRecord() if trace else None

    def plan(i):
        stop, preds = static[i] if static is not None else policy.stage_plan(i, N)
        return stop, [None] + [columns[k] for k in preds[1:]], preds

    i = path[0]
    n = 0
    queries = 1
    total = 0.0
    stop, cost, preds = plan(i)
    if trace:
        rec.rows.append((0, i, "query", i, 0.0, c))
    for t in range(1, horizon):
        x = path[t]
        n += 1
        if n >= stop:
            queries += 1
            if static is None:
                policy.observe(i, n, x)
            i = x
            n = 0
            stop, cost, preds = plan(i)
            if trace:
                rec.rows.append((t, x, "query", x, 0.0, total + queries * c))
        else:
            realized = cost[n][x]
            total += realized
            if trace:
                rec.rows.append((t, x, "predict", preds[n], realized, total + queries * c))
    return CostLedger(total, queries * c, horizon, queries, c), rec


def simulate(chain: ChainSpec, policy: Policy, c: float, N: int, horizon: int, rng: np.random.Generator,
             start: int = 0, trace: bool = False) -> tuple[CostLedger, TrajectoryRecord | None]:
    """Draw a fresh path from ``rng`` and run ``policy`` on it."""
    path = sample_path(chain, start, horizon, rng)
    return simulate_path(path, chain.loss, policy, c, N, trace)
