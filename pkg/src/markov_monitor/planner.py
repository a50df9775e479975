"""Optimal state-dependent threshold policy via average-cost policy iteration.

A threshold policy queries, observes state ``i``, predicts optimally for
``mu[i] - 1`` slots and queries again after ``mu[i]`` slots.  The time
between queries is a *stage*; the queried states form an embedded Markov
chain with kernel ``P^{mu[i]}`` row ``i``.

Two independent evaluators are provided:

* ``evaluate_thresholds`` solves the average-cost (gain/bias) equations
  ``h_i = Lambda(i, mu_i) - gain * mu_i + sum_j P^{mu_i}_ij h_j`` with
  ``h_0 = 0``;
* ``renewal_reward_gain`` uses the long-run distribution of the embedded
  chain started in state 0 and the renewal-reward ratio.

``policy_iteration`` is built on the first, ``exhaustive_oracle`` on the
second.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .chain import NStepTable, closed_classes
from .errors import HorizonExceeded, NoConvergence, SingularSystem, TooLarge
from .policies import ThresholdVector
from .predictor import expected_loss_profile

log = logging.getLogger(__name__)

PI_MAX_ITER = 1000
ORACLE_MAX_SIZE = 10**7
_CONSISTENCY_TOL = 1e-9
_TIE_TOL = 1e-11


@dataclass(frozen=True)
class StageCost:
    """``values[i, m]`` = expected cost of a stage opened by querying state i
    and closed after m slots (column 0 is unused and holds NaN)."""

    values: np.ndarray
    query_cost: float

    @property
    def max_stage(self) -> int:
        return self.values.shape[1] - 1

    def __call__(self, i: int, m: int) -> float:
        return float(self.values[i, m])


@dataclass
class PlanSolution:
    thresholds: ThresholdVector
    gain: float
    bias: np.ndarray
    iterations: int = 0
    gain_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "gain": self.gain,
            "bias": [float(b) for b in self.bias],
        }


def _check_horizon(table: NStepTable, N: int) -> None:
    if N > table.horizon:
        raise HorizonExceeded(f"N={N} exceeds table horizon {table.horizon}")


def stage_costs(table: NStepTable, loss: np.ndarray, c: float, N: int) -> StageCost:
    _check_horizon(table, N)
    K = table.num_states
    values = np.full((K, N + 1), np.nan)
    for i in range(K):
        profile = expected_loss_profile(table, loss, i, N - 1) if N > 1 else np.empty(0)
        values[i, 1:] = c + np.concatenate(([0.0], np.cumsum(profile)))
    return StageCost(values, float(c))


def _mu_array(mu) -> np.ndarray:
    return np.asarray(list(mu), dtype=np.int64)


def evaluate_thresholds(table: NStepTable, stage: StageCost, mu) -> tuple[float, np.ndarray]:
    """Gain and bias of a threshold policy, normalized so that ``bias[0] == 0``.

    The K bias equations plus the normalization form a square system in
    ``(h_0..h_{K-1}, gain)``.  It is rank-deficient when the embedded chain
    has several closed classes; if it is still consistent (every class has
    the same gain) the minimum-norm solution is returned, otherwise
    ``SingularSystem`` is raised.
    """
    mu = _mu_array(mu)
    K = table.num_states
    if mu.shape != (K,):
        raise ValueError(f"need {K} thresholds, got {mu.shape}")
    if mu.max() > min(stage.max_stage, table.horizon):
        raise HorizonExceeded(f"threshold {mu.max()} beyond stage table")
    rows = np.arange(K)
    Q = table.powers[mu, rows, :]
    A = np.zeros((K + 1, K + 1))
    A[:K, :K] = np.eye(K) - Q
    A[:K, K] = mu
    A[K, 0] = 1.0
    b = np.zeros(K + 1)
    b[:K] = stage.values[rows, mu]

    try:
        if np.linalg.cond(A) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        x = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        x, *_ = np.linalg.lstsq(A, b, rcond=None)
        resid = np.max(np.abs(A @ x - b))
        if resid > _CONSISTENCY_TOL * max(1.0, np.max(np.abs(b))):
            raise SingularSystem(
                f"gain/bias equations for thresholds {mu.tolist()} are inconsistent "
                f"(residual {resid:.3g}); the embedded chain has classes with different gains"
            ) from None
    bias = x[:K].copy()
    bias[0] = 0.0
    return float(x[K]), bias


def bellman_residuals(table: NStepTable, stage: StageCost, mu, gain: float, bias: np.ndarray) -> tuple[float, float]:
    """Return (max |Bellman residual| at mu, worst optimality violation).

    The optimality violation is ``max(0, h_i - min_m Q(i, m))`` over states,
    where ``Q(i, m) = Lambda(i, m) - gain*m + P^m_i . h``.
    """
    mu = _mu_array(mu)
    q = _q_values(table, stage, gain, bias)
    K = table.num_states
    bell = np.max(np.abs(q[np.arange(K), mu] - bias))
    viol = max(0.0, float(np.max(bias - np.nanmin(q[:, 1:], axis=1))))
    return float(bell), viol


def _q_values(table: NStepTable, stage: StageCost, gain: float, bias: np.ndarray) -> np.ndarray:
    N = stage.max_stage
    m = np.arange(N + 1)
    # future[i, m] = sum_j P^m_ij h_j
    future = np.einsum("mij,j->im", table.powers[: N + 1], bias)
    q = stage.values - gain * m[None, :] + future
    q[:, 0] = np.nan
    return q


def _improve(q: np.ndarray) -> np.ndarray:
    vals = q[:, 1:]
    best = np.min(vals, axis=1, keepdims=True)
    tol = _TIE_TOL * np.maximum(1.0, np.abs(best))
    # smallest m within tolerance of the minimum
    return np.argmax(vals <= best + tol, axis=1) + 1


def policy_iteration(table: NStepTable, loss: np.ndarray, c: float, N: int,
                     max_iter: int = PI_MAX_ITER, initial=None) -> PlanSolution:
    """Optimal thresholds in ``{1..N}^K`` by policy iteration.

    Starts from querying every slot (unless ``initial`` is given), whose
    equations are always consistent since every class then has gain ``c``.
    Stops when the threshold vector repeats.  A revisited vector other than
    the current one means the improvement step is cycling among tied
    policies; the best-gain, lexicographically smallest member is returned.
    """
    _check_horizon(table, N)
    stage = stage_costs(table, loss, c, N)
    K = table.num_states
    mu = _mu_array(initial) if initial is not None else np.ones(K, dtype=np.int64)
    seen: dict[tuple, float] = {}
    order: list[tuple] = []
    history: list[float] = []
    for it in range(1, max_iter + 1):
        gain, bias = evaluate_thresholds(table, stage, mu)
        key = tuple(int(m) for m in mu)
        seen[key] = gain
        order.append(key)
        history.append(gain)
        new = _improve(_q_values(table, stage, gain, bias))
        new_key = tuple(int(m) for m in new)
        if new_key == key:
            return PlanSolution(ThresholdVector(key), gain, bias, it, history)
        if new_key in seen:
            cycle = order[order.index(new_key):]
            best = min(cycle, key=lambda k: (seen[k], k))
            log.debug("policy iteration cycled among %s; picking %s", cycle, best)
            gain, bias = evaluate_thresholds(table, stage, best)
            return PlanSolution(ThresholdVector(best), gain, bias, it, history)
        mu = new
    raise NoConvergence(f"policy iteration did not settle in {max_iter} iterations (last thresholds {mu.tolist()})")


def renewal_reward_gain(table: NStepTable, stage: StageCost, mu, start: int = 0) -> float:
    """Long-run average cost of a threshold policy whose first query sees ``start``.

    Splits the embedded queried-state chain into closed classes, computes
    the probability of ending in each from ``start`` and, per class, the
    ratio of expected stage cost to expected stage length under the class's
    stationary distribution.
    """
    mu = _mu_array(mu)
    K = table.num_states
    rows = np.arange(K)
    Q = table.powers[mu, rows, :]
    lam = stage.values[rows, mu]
    classes = closed_classes(Q)
    in_class = np.zeros(K, dtype=bool)
    for cl in classes:
        in_class[cl] = True
    transient = np.flatnonzero(~in_class)

    gains = []
    for cl in classes:
        sub = Q[np.ix_(cl, cl)]
        n = len(cl)
        M = sub.T - np.eye(n)
        M[-1, :] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        pi = np.linalg.solve(M, rhs)
        gains.append(float(pi @ lam[cl]) / float(pi @ mu[cl]))

    if in_class[start]:
        return next(g for cl, g in zip(classes, gains) if start in cl)
    # absorption probabilities from the transient states
    QT = Q[np.ix_(transient, transient)]
    fund = np.linalg.inv(np.eye(len(transient)) - QT)
    s = int(np.flatnonzero(transient == start)[0])
    total = 0.0
    for cl, g in zip(classes, gains):
        absorb = fund @ Q[np.ix_(transient, cl)].sum(axis=1)
        total += absorb[s] * g
    return float(total)


def _batch_gains(table: NStepTable, stage: StageCost, mus: np.ndarray) -> np.ndarray:
    """Renewal-reward gains for a batch of threshold vectors (rows of ``mus``)."""
    B, K = mus.shape
    rows = np.arange(K)
    Q = table.powers[mus, rows[None, :], :]
    lam = stage.values[rows[None, :], mus]
    M = np.transpose(Q, (0, 2, 1)) - np.eye(K)[None]
    M[:, -1, :] = 1.0
    gains = np.empty(B)
    det = np.abs(np.linalg.det(M))
    ok = det > 1e-10
    if ok.any():
        rhs = np.zeros((int(ok.sum()), K, 1))
        rhs[:, -1, 0] = 1.0
        pi = np.linalg.solve(M[ok], rhs)[..., 0]
        gains[ok] = np.sum(pi * lam[ok], axis=1) / np.sum(pi * mus[ok], axis=1)
    for b in np.flatnonzero(~ok):
        gains[b] = renewal_reward_gain(table, stage, mus[b])
    return gains


def exhaustive_oracle(table: NStepTable, loss: np.ndarray, c: float, N: int,
                      max_size: int = ORACLE_MAX_SIZE, batch: int = 1 << 15) -> PlanSolution:
    """Brute-force minimum over all threshold vectors in ``{1..N}^K``."""
    _check_horizon(table, N)
    K = table.num_states
    if N**K > max_size:
        raise TooLarge(f"{N}^{K} threshold vectors exceed the guard {max_size}")
    stage = stage_costs(table, loss, c, N)
    best_gain, best_mu = np.inf, None
    candidates = itertools.product(range(1, N + 1), repeat=K)
    while True:
        chunk = np.array(list(itertools.islice(candidates, batch)), dtype=np.int64)
        if chunk.size == 0:
            break
        gains = _batch_gains(table, stage, chunk)
        b = int(np.argmin(gains))
        if gains[b] < best_gain:
            best_gain, best_mu = float(gains[b]), tuple(int(m) for m in chunk[b])
    try:
        _, bias = evaluate_thresholds(table, stage, best_mu)
    except SingularSystem:
        bias = np.full(K, np.nan)
    return PlanSolution(ThresholdVector(best_mu), best_gain, bias)
