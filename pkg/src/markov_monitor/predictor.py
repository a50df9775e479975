"""Minimum expected-loss state prediction from the last queried state."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import NStepTable
from .errors import HorizonExceeded


@dataclass(frozen=True)
class MonitorState:
    """Information available to the monitor: last queried state and time since."""

    last_state: int
    elapsed: int


@dataclass(frozen=True)
class Prediction:
    state: int
    expected_loss: float


def expected_losses(distribution: np.ndarray, loss: np.ndarray) -> np.ndarray:
    """Expected loss of predicting each state k when the truth ~ ``distribution``.

    Accepts a batch of distributions along leading axes.  The explicit
    multiply-and-reduce keeps batched and single-row results bit-identical,
    which matters for exact argmin ties.
    """
    return np.sum(distribution[..., :, None] * loss, axis=-2)


def predict_from_distribution(distribution: np.ndarray, loss: np.ndarray) -> Prediction:
    """Argmin over k of the expected loss; exact ties go to the lowest index."""
    costs = expected_losses(distribution, loss)
    k = int(np.argmin(costs))
    return Prediction(k, float(costs[k]))


def _check_horizon(table: NStepTable, n: int) -> None:
    if n > table.horizon:
        raise HorizonExceeded(f"elapsed {n} exceeds table horizon {table.horizon}")


def optimal_prediction(table: NStepTable, loss: np.ndarray, ms: MonitorState) -> Prediction:
    _check_horizon(table, ms.elapsed)
    if ms.elapsed < 1:
        raise ValueError("prediction needs elapsed >= 1")
    return predict_from_distribution(table.powers[ms.elapsed, ms.last_state], loss)


def expected_loss_profile(table: NStepTable, loss: np.ndarray, i: int, n_max: int) -> np.ndarray:
    """Optimal expected prediction loss from state ``i`` at elapsed 1..n_max.

    Entry ``n - 1`` holds the value for elapsed ``n``.
    """
    _check_horizon(table, n_max)
    return np.array([
        optimal_prediction(table, loss, MonitorState(i, n)).expected_loss
        for n in range(1, n_max + 1)
    ])
